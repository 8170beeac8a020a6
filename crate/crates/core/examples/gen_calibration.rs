//! Regenerates `data/calibration.txt` from the synthetic calibration set.

use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/calibration.txt");
    let cal = objrestore::estimate::Calibration::generate()?;
    std::fs::write(&path, cal.to_text())?;
    println!("wrote {}", path.display());
    Ok(())
}
