use std::fs::{self, OpenOptions};
use std::io::Write;
use std::time::Duration;

use kinetic_pn::bigfloat::Precision;
use kinetic_pn::error::Result;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::commands::RunRecord;

pub const FILE_NAME: &str = "manifest.jsonl";

/// Appends one JSON line describing the run to `manifest.jsonl` in the run
/// directory.
pub fn append(run: &RunRecord, args: &[String], prec: Precision, elapsed: Duration) -> Result<()> {
    let mut outputs = Vec::new();
    for path in &run.outputs {
        let digest = Sha256::digest(fs::read(path)?);
        outputs.push(json!({ "path": path.display().to_string(), "sha256": format!("{digest:x}") }));
    }
    let entry = json!({
        "command_line": args,
        "config": run.config,
        "precision_bits": prec.bits(),
        "wall_time_s": elapsed.as_secs_f64(),
        "outputs": outputs,
    });
    if !run.run_dir.as_os_str().is_empty() {
        fs::create_dir_all(&run.run_dir)?;
    }
    let mut file = OpenOptions::new().create(true).append(true).open(run.run_dir.join(FILE_NAME))?;
    writeln!(file, "{entry}")?;
    Ok(())
}
