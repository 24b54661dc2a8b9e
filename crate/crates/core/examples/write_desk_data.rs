//! Regenerates `data/case24.json` and `data/day1.json`.
//!
//! cargo run -p fcsd-core --example write_desk_data -- [out_dir]

use std::path::PathBuf;

use fcsd_core::desk;
use fcsd_core::horizon::HorizonConfig;
use fcsd_core::io;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"));
    std::fs::create_dir_all(&dir)?;
    let case = desk::case24();
    let scenario = desk::day1(&case, &HorizonConfig::default())?;
    io::save_case(&case, dir.join("case24.json"))?;
    io::save_scenario(&scenario, dir.join("day1.json"))?;
    println!("wrote {}", dir.display());
    Ok(())
}
