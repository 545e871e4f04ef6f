//! Drives the command-line layer in-process: a config file, a flag override,
//! and the verification table.

use psm::cli;

fn main() -> std::io::Result<()> {
    let dir = tempfile::tempdir()?;
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# weighted log estimate at alpha = p = 6\nalpha = 6\np = 6\nverify.count = 20\n",
    )?;
    let cfg = cfg.to_string_lossy().into_owned();
    let code = cli::run(["psm", "verify", "--suite", "lemma", "--config", &cfg]);
    println!("verify exit code {code}");
    let code = cli::run(["psm", "constants", "--config", &cfg, "--alpha", "5"]);
    println!("constants exit code {code}");
    let code = cli::run(["psm", "verify", "--config", &cfg, "--set", "no.such.key=1"]);
    println!("bad key exit code {code}");
    Ok(())
}
