use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use geofeed_core::{extract_locators, LocatorIndexEntry, Rir, RpslError, RpslReader};

use crate::config::Settings;
use crate::manifest::{self, Run};
use crate::{util, Status};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// RPSL dump files, optionally gzip-compressed.
    #[arg(required = true)]
    pub dumps: Vec<PathBuf>,
    /// Registry of every dump. Without it the registry is inferred from each file name.
    #[arg(long)]
    pub rir: Option<Rir>,
    /// Locator index to write (JSON lines).
    #[arg(short, long)]
    pub output: PathBuf,
}

fn infer_rir(path: &Path) -> Option<Rir> {
    let name = path.file_name()?.to_string_lossy().to_ascii_lowercase();
    ["afrinic", "apnic", "lacnic", "arin", "ripe"].iter().find(|r| name.contains(*r)).and_then(|r| r.parse().ok())
}

pub fn run(args: Args, settings: &mut Settings) -> Result<Status> {
    let mut run = Run::new("discover");
    let mut entries = Vec::new();
    // Record indices continue across dumps of one registry so record keys stay unique.
    let mut offsets: HashMap<Rir, usize> = HashMap::new();
    let (mut records, mut bearing, mut errors) = (0usize, 0usize, 0usize);
    for path in &args.dumps {
        let Some(rir) = args.rir.or_else(|| infer_rir(path)) else {
            bail!("cannot tell the registry of {}; pass --rir", path.display());
        };
        run.input(path);
        let offset = offsets.entry(rir).or_default();
        let mut seen = 0;
        for item in RpslReader::new(util::open_text(path)?, rir) {
            match item {
                Ok(mut record) => {
                    seen = seen.max(record.index + 1);
                    record.index += *offset;
                    records += 1;
                    let locators = extract_locators(&record);
                    if !locators.is_empty() {
                        bearing += 1;
                    }
                    entries.extend(locators.iter().map(|l| LocatorIndexEntry::new(&record, l)));
                }
                Err(RpslError::RangeParseError { index, text }) => {
                    seen = seen.max(index + 1);
                    errors += 1;
                    eprintln!("warning: {}: record {index}: cannot parse range {text:?}", path.display());
                }
                Err(e) => bail!("{}: {e}", path.display()),
            }
        }
        *offset += seen;
    }
    if let Some(rir) = args.rir {
        settings.record("rir", rir);
    }
    util::write_jsonl(&args.output, &entries)?;
    run.output(&args.output);
    eprintln!("{records} records, {bearing} with geofeed locators, {} locators, {errors} unparseable", entries.len());
    run.finish(&manifest::beside(&args.output), settings, 0)?;
    Ok(Status::Success)
}
