use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{DateTime, Utc};
use geofeed_core::auth::demo::Demo;
use geofeed_core::auth::generate_identity;
use geofeed_core::auth::{
    countersign as append_countersignature, issue_certificate, self_signed, sign_scope, verify_bundle, CertRole, Certificate,
    CertificateRequest, CertificateStore, CountersignTarget, Identity, IdentityFile, PublicKeyFile, SignedGeofeedBundle, Validity,
    VerificationReport,
};
use geofeed_core::{Prefix, PrefixSet};
use serde::Deserialize;

use crate::config::Settings;
use crate::manifest::{self, Run};
use crate::{util, Status};

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum Role {
    /// Address holder; delegations and countersignatures stay inside its prefixes.
    Holder,
    /// Attestation authority; may countersign without holding prefixes.
    Authority,
}

impl From<Role> for CertRole {
    fn from(r: Role) -> CertRole {
        match r {
            Role::Holder => CertRole::Holder,
            Role::Authority => CertRole::Authority,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct KeygenArgs {
    #[arg(long)]
    pub subject: String,
    /// Derive the key from this seed instead of the OS RNG (tests only).
    #[arg(long)]
    pub seed: Option<String>,
    /// Private identity file to write.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Public key file [default: <output> with a .pub.json extension]
    #[arg(long)]
    pub public: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct IssueArgs {
    /// Issuer identity file.
    #[arg(long)]
    pub issuer_key: PathBuf,
    /// Issuer certificate. Without it a self-signed root is made for the issuer key.
    #[arg(long, requires = "subject_key")]
    pub issuer_cert: Option<PathBuf>,
    /// Subject public key file (an identity file also works).
    #[arg(long, requires = "issuer_cert")]
    pub subject_key: Option<PathBuf>,
    /// Subject name [default: the key file's subject]
    #[arg(long)]
    pub subject: Option<String>,
    #[arg(long, value_enum, default_value = "holder")]
    pub role: Role,
    /// Authorized prefix; repeat or separate with commas.
    #[arg(long = "prefix", value_delimiter = ',')]
    pub prefixes: Vec<Prefix>,
    /// Start of validity [default: now]
    #[arg(long, value_parser = util::parse_time)]
    pub not_before: Option<DateTime<Utc>>,
    #[arg(long, default_value_t = 365)]
    pub days: i64,
    /// Issuance time, at which the issuer certificate must be valid [default: --not-before, else now]
    #[arg(long, value_parser = util::parse_time)]
    pub at: Option<DateTime<Utc>>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct SignArgs {
    /// Signer identity file.
    #[arg(long)]
    pub key: PathBuf,
    /// Signer certificate.
    #[arg(long)]
    pub cert: PathBuf,
    /// Geofeed file to sign.
    #[arg(long)]
    pub file: PathBuf,
    /// Prefixes whose lines the signature covers; repeat or separate with commas.
    #[arg(long, value_delimiter = ',', required = true)]
    pub scope: Vec<Prefix>,
    /// Append to this bundle instead of starting a new one.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    /// URL recorded in a new bundle.
    #[arg(long)]
    pub url: Option<String>,
    /// Do not embed the file bytes in a new bundle.
    #[arg(long)]
    pub no_embed: bool,
    /// Signing time [default: now]
    #[arg(long, value_parser = util::parse_time)]
    pub at: Option<DateTime<Utc>>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, clap::Args)]
#[command(group(clap::ArgGroup::new("what").required(true).args(["target", "scope"])))]
pub struct CountersignArgs {
    #[arg(long)]
    pub key: PathBuf,
    #[arg(long)]
    pub cert: PathBuf,
    #[arg(long)]
    pub bundle: PathBuf,
    /// Geofeed file [default: the bundle's embedded copy]
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Index of the element to countersign.
    #[arg(long)]
    pub target: Option<usize>,
    /// Sign this scope of the file instead of an element.
    #[arg(long, value_delimiter = ',')]
    pub scope: Vec<Prefix>,
    #[arg(long, value_parser = util::parse_time)]
    pub at: Option<DateTime<Utc>>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Geofeed file [default: the bundle's embedded copy]
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Trust anchor certificate file; repeatable.
    #[arg(long = "anchor", required = true)]
    pub anchors: Vec<PathBuf>,
    /// Intermediate or signer certificate file (one certificate or an array); repeatable.
    #[arg(long = "cert")]
    pub certs: Vec<PathBuf>,
    /// Verification time [default: now]
    #[arg(long, value_parser = util::parse_time)]
    pub at: Option<DateTime<Utc>>,
    /// Report file [default: stdout]
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct DemoArgs {
    #[arg(long)]
    pub output_dir: PathBuf,
    /// Key derivation seed, so reruns produce identical keys.
    #[arg(long, default_value = "geofeed-demo")]
    pub seed: String,
    /// Issuance and verification time [default: now]
    #[arg(long, value_parser = util::parse_time)]
    pub at: Option<DateTime<Utc>>,
}

fn load_identity(path: &Path) -> Result<Identity> {
    let file: IdentityFile = util::read_json(path)?;
    file.into_identity().map_err(anyhow::Error::msg).with_context(|| format!("in {}", path.display()))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CertFile {
    One(Box<Certificate>),
    Many(Vec<Certificate>),
}

fn load_certs(path: &Path) -> Result<Vec<Certificate>> {
    Ok(match util::read_json::<CertFile>(path)? {
        CertFile::One(c) => vec![*c],
        CertFile::Many(v) => v,
    })
}

fn load_cert(path: &Path) -> Result<Certificate> {
    match load_certs(path)?.as_slice() {
        [one] => Ok(one.clone()),
        _ => bail!("{} must hold exactly one certificate", path.display()),
    }
}

/// The file given on the command line, else the bundle's embedded copy.
fn bundle_file(run: &mut Run, bundle: &SignedGeofeedBundle, path: Option<&Path>) -> Result<Vec<u8>> {
    match path {
        Some(p) => {
            run.input(p);
            util::read_bytes(p)
        }
        None => bundle.file.embedded.clone().context("bundle has no embedded file; pass --file"),
    }
}

fn refused(what: &str, e: impl std::fmt::Display) -> Status {
    eprintln!("refused: {what}: {e}");
    Status::Failed
}

pub fn keygen(args: KeygenArgs, s: &mut Settings) -> Result<Status> {
    let mut run = Run::new("keygen");
    let id = generate_identity(&args.subject, args.seed.as_deref().map(str::as_bytes));
    let public = args.public.unwrap_or_else(|| args.output.with_extension("pub.json"));
    util::write_json(&args.output, &id.to_file())?;
    util::write_json(&public, &id.public_file())?;
    run.output(&args.output);
    run.output(&public);
    s.record("subject", &args.subject);
    s.record("seeded", args.seed.is_some());
    run.finish(&manifest::beside(&args.output), s, 0)?;
    Ok(Status::Success)
}

pub fn issue(args: IssueArgs, s: &mut Settings) -> Result<Status> {
    let mut run = Run::new("issue");
    run.input(&args.issuer_key);
    let issuer = load_identity(&args.issuer_key)?;
    let start = args.not_before.unwrap_or_else(Utc::now);
    let validity = Validity::days_from(start, args.days);
    let at = args.at.unwrap_or(start);
    let prefixes: PrefixSet = args.prefixes.iter().copied().collect();
    let result = match &args.issuer_cert {
        None => {
            let mut id = issuer;
            if let Some(name) = &args.subject {
                id = rename(&id, name);
            }
            self_signed(&id, args.role.into(), prefixes, validity)
        }
        Some(cert_path) => {
            run.input(cert_path);
            let issuer_cert = load_cert(cert_path)?;
            let key_path = args.subject_key.as_ref().expect("clap requires --subject-key");
            run.input(key_path);
            let key: PublicKeyFile = util::read_json(key_path)?;
            let req = CertificateRequest {
                subject_name: args.subject.clone().unwrap_or_else(|| key.subject.clone()),
                subject_key: key.key(),
                role: args.role.into(),
                prefixes,
                validity,
            };
            issue_certificate(&issuer, &issuer_cert, req, at)
        }
    };
    let cert = match result {
        Ok(c) => c,
        Err(e) => return Ok(refused("issuance", e)),
    };
    util::write_json(&args.output, &cert)?;
    run.output(&args.output);
    eprintln!("issued {} for {} ({})", cert.serial, cert.subject_name, cert.authorized_prefixes);
    run.finish(&manifest::beside(&args.output), s, 0)?;
    Ok(Status::Success)
}

/// Same key under another subject name.
fn rename(id: &Identity, subject: &str) -> Identity {
    let file = id.to_file();
    let secret: [u8; 32] = file.secret_key.as_slice().try_into().expect("32-byte secret");
    Identity::from_secret(subject, secret)
}

pub fn sign(args: SignArgs, s: &mut Settings) -> Result<Status> {
    let mut run = Run::new("sign");
    for p in [&args.key, &args.cert, &args.file] {
        run.input(p);
    }
    let id = load_identity(&args.key)?;
    let cert = load_cert(&args.cert)?;
    let file = util::read_bytes(&args.file)?;
    let mut bundle = match &args.bundle {
        Some(p) => {
            run.input(p);
            let b: SignedGeofeedBundle = util::read_json(p)?;
            if !b.matches_file(&file) {
                return Ok(refused("signing", "file does not match the bundle's file digest"));
            }
            b
        }
        None => SignedGeofeedBundle::new(&file, args.url.clone(), !args.no_embed),
    };
    let at = args.at.unwrap_or_else(Utc::now);
    let element = match sign_scope(&id, &cert, &file, args.scope.iter().copied().collect(), at) {
        Ok(e) => e,
        Err(e) => return Ok(refused("signing", e)),
    };
    let index = bundle.push(element)?;
    util::write_json(&args.output, &bundle)?;
    run.output(&args.output);
    eprintln!("element {index} signed by {}", cert.subject_name);
    run.finish(&manifest::beside(&args.output), s, 0)?;
    Ok(Status::Success)
}

pub fn countersign(args: CountersignArgs, s: &mut Settings) -> Result<Status> {
    let mut run = Run::new("countersign");
    for p in [&args.key, &args.cert, &args.bundle] {
        run.input(p);
    }
    let id = load_identity(&args.key)?;
    let cert = load_cert(&args.cert)?;
    let mut bundle: SignedGeofeedBundle = util::read_json(&args.bundle)?;
    let file = bundle_file(&mut run, &bundle, args.file.as_deref())?;
    let target = match args.target {
        Some(j) => CountersignTarget::PriorSignature(j),
        None => CountersignTarget::FileScope(args.scope.iter().copied().collect()),
    };
    let at = args.at.unwrap_or_else(Utc::now);
    let index = match append_countersignature(&id, &cert, &mut bundle, &file, target, at) {
        Ok(i) => i,
        Err(e) => return Ok(refused("countersigning", e)),
    };
    util::write_json(&args.output, &bundle)?;
    run.output(&args.output);
    eprintln!("element {index} countersigned by {}", cert.subject_name);
    run.finish(&manifest::beside(&args.output), s, 0)?;
    Ok(Status::Success)
}

fn print_report(report: &VerificationReport) {
    for e in &report.elements {
        let target = match e.target {
            geofeed_core::auth::Target::FileScope => "file".to_string(),
            geofeed_core::auth::Target::PriorSignature(j) => format!("#{j}"),
        };
        let verdict =
            if e.valid { "valid".to_string() } else { format!("FAILED {}", serde_json::to_string(&e.failures).unwrap_or_default()) };
        eprintln!(
            "#{} {} over {target}: {verdict}; path {}",
            e.index,
            e.signer_subject.as_deref().unwrap_or("unknown signer"),
            e.path.join(" <- ")
        );
    }
    for t in &report.trust_levels {
        match (&t.subject, t.depth) {
            (Some(subject), Some(depth)) => eprintln!("scope #{}: trusted up to {subject} (depth {depth})", t.root),
            _ => eprintln!("scope #{}: not verified", t.root),
        }
    }
}

pub fn verify(args: VerifyArgs, s: &mut Settings) -> Result<Status> {
    let mut run = Run::new("verify");
    run.input(&args.bundle);
    let bundle: SignedGeofeedBundle = util::read_json(&args.bundle)?;
    let file = bundle_file(&mut run, &bundle, args.file.as_deref())?;
    let mut anchors = Vec::new();
    for p in &args.anchors {
        run.input(p);
        anchors.extend(load_certs(p)?);
    }
    let mut store = CertificateStore::new();
    for p in &args.certs {
        run.input(p);
        for c in load_certs(p)? {
            store.insert(c);
        }
    }
    let at = args.at.unwrap_or_else(Utc::now);
    s.record("at", at.to_rfc3339());
    let report = match verify_bundle(&bundle, &file, &anchors, &store, at) {
        Ok(r) => r,
        Err(e) => return Ok(refused("verification", e)),
    };
    print_report(&report);
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

fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if c == ' ' && !out.ends_with('-') {
            out.push('-');
        }
    }
    out
}

pub fn demo(args: DemoArgs, s: &mut Settings) -> Result<Status> {
    let mut run = Run::new("demo");
    let dir = &args.output_dir;
    let at = args.at.unwrap_or_else(Utc::now);
    s.record("seed", &args.seed);
    s.record("at", at.to_rfc3339());
    let demo = Demo::build(args.seed.as_bytes(), at)?;

    let mut written = vec![(dir.join("geofeed.csv"), demo.file.clone())];
    written.push((dir.join("bundle.json"), util::to_json(&demo.bundle).into_bytes()));
    for p in demo.parties() {
        let name = slug(p.identity.subject());
        written.push((dir.join("certs").join(format!("{name}.cert.json")), util::to_json(&p.cert).into_bytes()));
        written.push((dir.join("keys").join(format!("{name}.key.json")), util::to_json(&p.identity.to_file()).into_bytes()));
    }
    let report = verify_bundle(&demo.bundle, &demo.file, &demo.anchors(), &demo.store(), demo.issued_at)?;
    written.push((dir.join("report.json"), util::to_json(&report).into_bytes()));
    for (path, bytes) in &written {
        util::write_bytes(path, bytes)?;
        run.output(path);
    }
    print_report(&report);
    let status = if report.all_valid() { Status::Success } else { Status::Failed };
    run.finish(&manifest::in_dir(dir), s, status.code())?;
    Ok(status)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("AT&T"), "att");
        assert_eq!(slug("LS Networks"), "ls-networks");
        assert_eq!(slug("Verisign"), "verisign");
    }
}
