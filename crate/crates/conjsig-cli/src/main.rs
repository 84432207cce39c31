//! Command-line front end: key management, signing, verification, ledger
//! inspection, and the attack demonstrations.
//!
//! Exit codes: 0 success/accept, 1 protocol-level rejection (reason on
//! stderr) or failed demo, 2 usage and I/O problems.

use clap::{Parser, Subcommand, ValueEnum};
use conjsig::attack::demos::{self, DemoConfig};
use conjsig::ledger::{Clock, FactorLedger, LedgerError};
use conjsig::profile::Profile;
use conjsig::scheme::{
    admissible_divisors, setup, sign, verify, PrivateKey, PublicKey, SchemeError, Signature,
    VerifyOutcome,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "conjsig", version, about = "Conjugation-based signatures with a used-factor ledger")]
struct Cli {
    /// Parameter profile to operate under
    #[arg(long, global = true, default_value = "toy", value_parser = parse_profile)]
    profile: Profile,

    /// Used-factor ledger file
    #[arg(
        long,
        global = true,
        env = "CONJSIG_LEDGER",
        default_value = "conjsig.ledger"
    )]
    ledger: PathBuf,

    /// Private key file
    #[arg(long, global = true, default_value = "conjsig.key")]
    key: PathBuf,

    /// Public key file
    #[arg(long = "pub", global = true, default_value = "conjsig.pub")]
    public: PathBuf,

    /// Seed for deterministic output (also pins ledger timestamps)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Encoding for files this invocation writes
    #[arg(long, global = true, value_enum, default_value_t = Format::Binary)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Binary,
    Hex,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a key pair and write it to --key / --pub
    Keygen,
    /// Sign a message file, consuming one factorization
    Sign {
        message_file: PathBuf,
        /// Destination for the signature (stdout when omitted)
        sig_file: Option<PathBuf>,
    },
    /// Check a signature against a message file and the ledger
    Verify {
        message_file: PathBuf,
        sig_file: PathBuf,
    },
    /// Inspect the used-factor ledger
    Ledger {
        #[command(subcommand)]
        action: LedgerAction,
    },
    /// Run a named attack demonstration
    Attack {
        /// One of: root, forge, tamper, csp
        demo: String,
    },
}

#[derive(Subcommand)]
enum LedgerAction {
    /// Human-readable entry listing
    List,
    /// Stable line-oriented export
    Export,
}

fn parse_profile(name: &str) -> Result<Profile, String> {
    Profile::by_name(name)
        .ok_or_else(|| format!("unknown profile {name:?} (expected one of: {})", Profile::names().join(", ")))
}

/// A failure that has decided its exit code.
struct Failure {
    code: u8,
    message: String,
}

/// Protocol said no: exit 1.
fn reject(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

/// Environment or input unusable: exit 2.
fn fault(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        fault(format!("i/o error: {e}"))
    }
}

impl From<LedgerError> for Failure {
    fn from(e: LedgerError) -> Failure {
        fault(format!("ledger error: {e}"))
    }
}

impl From<SchemeError> for Failure {
    fn from(e: SchemeError) -> Failure {
        match e {
            // refusals the protocol itself issues
            SchemeError::FactorizationsExhausted | SchemeError::LedgerConflict { .. } => {
                reject(e.to_string())
            }
            other => fault(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn make_rng(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    }
}

fn make_clock(seed: Option<u64>) -> Clock {
    match seed {
        Some(_) => Clock::Fixed(0),
        None => Clock::System,
    }
}

fn read_file(path: &Path, what: &str) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| fault(format!("cannot read {what} {}: {e}", path.display())))
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Keygen => keygen(&cli),
        Command::Sign {
            ref message_file,
            ref sig_file,
        } => do_sign(&cli, message_file, sig_file.as_deref()),
        Command::Verify {
            ref message_file,
            ref sig_file,
        } => do_verify(&cli, message_file, sig_file),
        Command::Ledger { ref action } => ledger_cmd(&cli, action),
        Command::Attack { ref demo } => attack_cmd(&cli, demo),
    }
}

fn keygen(cli: &Cli) -> Result<(), Failure> {
    let profile = &cli.profile;
    let mut rng = make_rng(cli.seed);
    let (pk, sk) = setup(
        &profile.descriptor(),
        &profile.hash_params(),
        profile,
        &mut rng,
    )?;

    let hex_mode = cli.format == Format::Hex;
    std::fs::write(&cli.key, sk.to_file_bytes(hex_mode))?;
    restrict_permissions(&cli.key)?;
    std::fs::write(&cli.public, pk.to_file_bytes(hex_mode))?;

    println!("generated key {} on profile {}", hex_string(pk.key_id()), profile.name());
    println!("private key -> {}", cli.key.display());
    println!("public key  -> {}", cli.public.display());
    Ok(())
}

#[cfg(unix)]
fn restrict_permissions(path: &Path) -> std::io::Result<()> {
    use std::os::unix::fs::PermissionsExt;
    std::fs::set_permissions(path, std::fs::Permissions::from_mode(0o600))
}

#[cfg(not(unix))]
fn restrict_permissions(_path: &Path) -> std::io::Result<()> {
    Ok(())
}

fn load_keys(cli: &Cli) -> Result<(PublicKey, PrivateKey), Failure> {
    let sk = PrivateKey::from_file_bytes(&read_file(&cli.key, "private key")?)
        .map_err(|e| fault(format!("private key {}: {e}", cli.key.display())))?;
    let pk = PublicKey::from_file_bytes(&read_file(&cli.public, "public key")?)
        .map_err(|e| fault(format!("public key {}: {e}", cli.public.display())))?;
    Ok((pk, sk))
}

fn do_sign(cli: &Cli, message_file: &Path, sig_file: Option<&Path>) -> Result<(), Failure> {
    let (pk, sk) = load_keys(cli)?;
    let message = read_file(message_file, "message file")?;
    let mut ledger = FactorLedger::open(&cli.ledger, make_clock(cli.seed))?;
    let mut rng = make_rng(cli.seed);

    let sig = sign(&sk, &pk, &message, &mut ledger, &mut rng)?;
    let remaining = admissible_divisors(&sk, &ledger).len();

    let bytes = sig.to_file_bytes(cli.format == Format::Hex);
    match sig_file {
        Some(path) => {
            std::fs::write(path, bytes)?;
            println!(
                "signed {} with n_j={}; {remaining} factorization(s) left",
                message_file.display(),
                sig.n_j()
            );
            println!("signature -> {}", path.display());
        }
        None => {
            std::io::stdout().write_all(&bytes)?;
        }
    }
    Ok(())
}

fn do_verify(cli: &Cli, message_file: &Path, sig_file: &Path) -> Result<(), Failure> {
    let pk = PublicKey::from_file_bytes(&read_file(&cli.public, "public key")?)
        .map_err(|e| fault(format!("public key {}: {e}", cli.public.display())))?;
    let message = read_file(message_file, "message file")?;
    let sig = Signature::from_file_bytes(&read_file(sig_file, "signature file")?)
        .map_err(|e| fault(format!("signature {}: {e}", sig_file.display())))?;
    // a missing ledger file is an empty ledger, so this is always ledgered
    let ledger = FactorLedger::open(&cli.ledger, make_clock(cli.seed))?;

    match verify(&pk, &message, &sig, Some(&ledger)) {
        VerifyOutcome::Accept => {
            println!("accept");
            Ok(())
        }
        VerifyOutcome::Reject(reason) => Err(reject(format!("reject: {reason}"))),
    }
}

fn ledger_cmd(cli: &Cli, action: &LedgerAction) -> Result<(), Failure> {
    let ledger = FactorLedger::open(&cli.ledger, make_clock(cli.seed))?;
    match action {
        LedgerAction::List => {
            for key_id in ledger.key_ids() {
                for entry in ledger.iterate(key_id) {
                    let event = entry
                        .event_digest
                        .map(|d| hex_string(&d[..4]))
                        .unwrap_or_else(|| "-".into());
                    println!(
                        "key={} n_j={} at={} event={}",
                        hex_string(key_id),
                        entry.n_j,
                        conjsig::ledger::iso8601_utc(entry.timestamp),
                        event
                    );
                }
            }
            println!(
                "total: {} entry(ies) across {} key(s)",
                ledger.len(),
                ledger.key_ids().len()
            );
        }
        LedgerAction::Export => {
            let mut out = std::io::stdout().lock();
            ledger.export(&mut out)?;
        }
    }
    Ok(())
}

fn attack_cmd(cli: &Cli, name: &str) -> Result<(), Failure> {
    let demo = demos::find(name).ok_or_else(|| {
        let names: Vec<&str> = demos::registry().iter().map(|d| d.name()).collect();
        fault(format!(
            "unknown demo {name:?} (expected one of: {})",
            names.join(", ")
        ))
    })?;
    let report = demo.run(&DemoConfig {
        profile: cli.profile.clone(),
        seed: cli.seed.unwrap_or(0),
    });
    println!("{report}");
    if report.all_passed() {
        Ok(())
    } else {
        Err(reject(format!("demo {name} failed")))
    }
}
