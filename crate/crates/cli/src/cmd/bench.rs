use std::path::PathBuf;

use anyhow::Result;
use geofeed_core::auth::simulate::run_bench;

use crate::config::Settings;
use crate::manifest::{self, Run};
use crate::{util, Status};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Leaf publisher certificates.
    #[arg(long)]
    pub certs: usize,
    /// Holder levels below the root authority.
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    /// Report file [default: stdout]
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn run(args: Args, s: &mut Settings) -> Result<Status> {
    let mut run = Run::new("bench");
    s.record("certs", args.certs);
    s.record("depth", args.depth);
    let report = run_bench(args.certs, args.depth)?;
    eprintln!(
        "{} certificates over levels {:?}: issuance {:.0} ms, signing {:.0} ms, verification {:.0} ms, total {:.0} ms; {}/{} elements valid",
        report.certificates,
        report.level_sizes,
        report.issuance.as_secs_f64() * 1e3,
        report.signing.as_secs_f64() * 1e3,
        report.verification.as_secs_f64() * 1e3,
        report.total.as_secs_f64() * 1e3,
        report.valid_elements,
        report.chain_elements
    );
    let status = if report.all_valid() { Status::Success } else { Status::Failed };
    match &args.output {
        Some(out) => {
            util::write_json(out, &report)?;
            run.output(out);
            run.finish(&manifest::beside(out), s, status.code())?;
        }
        None => print!("{}", util::to_json(&report)),
    }
    Ok(status)
}
