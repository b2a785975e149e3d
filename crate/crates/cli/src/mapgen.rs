//! Generates the two bundled test circuits (a stadium oval and a wavy
//! closed loop) as loadable track directories: map.png + map.txt +
//! raceline.csv each. Output is fully deterministic, so regenerating over an
//! existing directory is byte-identical.

use anyhow::Result;
use clap::Parser;
use osracer_core::track::synth;

#[derive(Parser)]
#[command(name = "mapgen", version, about = "Generate the bundled synthetic track pair")]
struct Cli {
    /// output directory; tracks land in <out>/a and <out>/b
    #[arg(long, default_value = "maps")]
    out: std::path::PathBuf,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: &Cli) -> Result<()> {
    let (a, b) = synth::standard_pair();
    for map in [a, b] {
        let dir = cli.out.join(&map.id);
        map.write_dir(&dir)?;
        println!(
            "map {}: {}x{} cells at {} m, raceline {:.1} m ({} waypoints) -> {}",
            map.id,
            map.width_cells,
            map.height_cells,
            map.resolution,
            raceline_length(&map),
            map.waypoints.len(),
            dir.display()
        );
    }
    Ok(())
}

fn raceline_length(map: &synth::SynthMap) -> f64 {
    let mut len = 0.0;
    for pair in map.waypoints.windows(2) {
        len += (pair[1].x - pair[0].x).hypot(pair[1].y - pair[0].y);
    }
    // closing segment of the loop
    if let (Some(first), Some(last)) = (map.waypoints.first(), map.waypoints.last()) {
        len += (first.x - last.x).hypot(first.y - last.y);
    }
    len
}
