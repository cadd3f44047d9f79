//! Drives the batch runner from an in-memory config, as the binary does.

use antibody_lab::cli::{run_command, Command, RunConfig};

fn main() -> antibody_lab::Result<()> {
    let dir = std::env::temp_dir().join("antibody-lab-example");
    let text = r#"{
        "model": {"flow": {"family": "linear_decay", "a": 1},
                  "boost": {"family": "additive_boost", "L": 1}, "lambda": 1},
        "sim": {"n_paths": 20000, "seed": 7, "t_end": 4, "checkpoints": [0, 1, 2, 4]},
        "sweep": {"a": {"start": 0.5, "stop": 1.0, "step": 0.1}, "b": 2, "lambda": 1}
    }"#;
    let overrides = [("output.directory".to_string(), dir.display().to_string())];
    let cfg = RunConfig::from_json(text, &overrides)?;
    println!("config hash {}", cfg.hash());
    for cmd in [Command::Simulate, Command::Evolve, Command::Sweep] {
        let out = run_command(cmd, &cfg)?;
        for f in out.files {
            println!("  wrote {}", f.display());
        }
    }
    Ok(())
}
