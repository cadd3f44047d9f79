use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::config::{as_config, OutputFormat, RunConfig};
use super::{Command, SCHEMA_VERSION};
use crate::density::{build_generator_with, evolve_checkpoints, stationary_density, total_variation, DensityVector};
use crate::error::{Error, Result};
use crate::stability::{classify_power_law, foguel_verdict_with, sweeping_rate, VerdictKind};
use crate::trajectory::{ensemble_states, histogram, simulate_paths};

/// Files written by a command and whether its checks passed.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub passed: bool,
}

/// Writes artifacts under the output directory, each starting with the metadata line.
pub(crate) struct Sink {
    dir: PathBuf,
    hash: String,
    seed: u64,
    files: Vec<PathBuf>,
}

impl Sink {
    pub(crate) fn new(cfg: &RunConfig) -> Result<Self> {
        let dir = cfg.output.directory.clone();
        std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        Ok(Self {
            dir,
            hash: cfg.hash(),
            seed: cfg.sim.seed,
            files: Vec::new(),
        })
    }

    pub(crate) fn csv(&mut self, name: &str, body: &str) -> Result<()> {
        let text = format!("# config_hash={} seed={}\n{body}", self.hash, self.seed);
        self.write(name, &text)
    }

    pub(crate) fn json(&mut self, name: &str, mut value: serde_json::Value) -> Result<()> {
        if let Some(map) = value.as_object_mut() {
            map.insert("config_hash".into(), json!(self.hash));
            map.insert("seed".into(), json!(self.seed));
        }
        let text = serde_json::to_string_pretty(&value).expect("json value serializes") + "\n";
        self.write(name, &text)
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    pub(crate) fn finish(self, passed: bool) -> Outcome {
        Outcome { files: self.files, passed }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// `cell_left,cell_right,density,mass` plus an overflow row, so the mass column sums to 1.
pub(crate) fn density_csv(f: &DensityVector) -> String {
    let g = f.grid();
    let dx = g.dx();
    let mut s = String::from("cell_left,cell_right,density,mass\n");
    for (i, v) in f.values().iter().enumerate() {
        let _ = writeln!(s, "{:.12e},{:.12e},{:.12e},{:.12e}", g.left(i), g.right(i), v, v * dx);
    }
    let _ = writeln!(s, "{:.12e},inf,0,{:.12e}", g.x_max(), f.escaped_mass());
    s
}

pub fn run_command(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    match command {
        Command::Simulate => simulate(cfg),
        Command::Evolve => evolve(cfg),
        Command::Stationary => stationary(cfg),
        Command::Classify => classify(cfg),
        Command::Sweep => sweep(cfg),
        Command::Verify => super::verify::verify(cfg),
    }
}

fn simulate(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.model()?;
    let grid = cfg.grid(&model)?;
    let sim = &cfg.sim;
    let paths = simulate_paths(&model, &sim.initial, sim.t_end, sim.n_paths, sim.seed).map_err(as_config)?;
    let mut sink = Sink::new(cfg)?;

    let mut body = String::from("path,t_k,pre_state,post_state\n");
    for (k, p) in paths.iter().take(sim.paths_saved).enumerate() {
        for line in p.to_csv().lines().skip(1) {
            let _ = writeln!(body, "{k},{line}");
        }
    }
    sink.csv("paths.csv", &body)?;

    let finals: Vec<f64> = paths.iter().map(|p| p.sample_at(&model, sim.t_end)).collect::<Result<_>>()?;
    let hist = histogram(&finals, &grid);
    sink.csv("histogram.csv", &hist.to_csv())?;

    let mut body = String::from("t,mean,mean_std_error,second_moment,second_moment_std_error\n");
    for t in sim.times() {
        let xs = if t == sim.t_end {
            finals.clone()
        } else {
            ensemble_states(&model, &sim.initial, t, sim.n_paths, sim.seed)?
        };
        let (m1, s1) = mean_se(xs.iter().copied());
        let (m2, s2) = mean_se(xs.iter().map(|x| x * x));
        let _ = writeln!(body, "{t:.12e},{m1:.12e},{s1:.12e},{m2:.12e},{s2:.12e}");
    }
    sink.csv("moments.csv", &body)?;

    let jumps = paths.iter().map(|p| p.n_jumps() as f64);
    let (jm, js) = mean_se(jumps);
    let (xm, xs) = mean_se(finals.iter().copied());
    let hist_mean = hist.density.moment(1);
    println!("paths: {}", sim.n_paths);
    println!("jumps per path: {jm:.6} ± {js:.6}");
    println!("mean at t={}: {xm:.6} ± {xs:.6} (histogram {hist_mean:.6}, out of grid {:.3e})", sim.t_end, hist.out_of_grid);
    if cfg.output.wants(OutputFormat::Json) {
        sink.json(
            "summary.json",
            json!({"n_paths": sim.n_paths, "t_end": sim.t_end, "mean_jumps": jm, "mean_jumps_std_error": js,
                   "mean": xm, "mean_std_error": xs, "histogram_mean": hist_mean, "out_of_grid": hist.out_of_grid}),
        )?;
    }
    Ok(sink.finish(true))
}

fn mean_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn evolve(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.model()?;
    let grid = cfg.grid(&model)?;
    let f0 = cfg.sim.initial.to_density(&grid).map_err(as_config)?;
    let second = cfg
        .sim
        .second_initial
        .as_ref()
        .map(|i| i.to_density(&grid))
        .transpose()
        .map_err(as_config)?;
    let a = build_generator_with(&model, &grid, cfg.solver)?;
    let times = cfg.sim.times();
    let snaps = evolve_checkpoints(&a, &f0, &times)?;
    let others = second.map(|g| evolve_checkpoints(&a, &g, &times)).transpose()?;
    let mut sink = Sink::new(cfg)?;
    let mut tv = String::from("t,tv_to_previous,tv_between_initials\n");
    for (k, (t, f)) in times.iter().zip(&snaps).enumerate() {
        sink.csv(&format!("density_t{t}.csv"), &density_csv(f))?;
        let prev = if k == 0 { 0.0 } else { total_variation(f, &snaps[k - 1])? };
        let between = match &others {
            Some(o) => format!("{:.12e}", total_variation(f, &o[k])?),
            None => String::new(),
        };
        let _ = writeln!(tv, "{t:.12e},{prev:.12e},{between}");
        println!("t={t}: mass={:.12} escaped={:.3e}", f.total_mass(), f.escaped_mass());
    }
    sink.csv("tv_series.csv", &tv)?;
    Ok(sink.finish(true))
}

fn stationary(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.model()?;
    let grid = cfg.grid(&model)?;
    let a = build_generator_with(&model, &grid, cfg.solver)?;
    let s = stationary_density(&a)?;
    let mut sink = Sink::new(cfg)?;
    sink.csv("stationary.csv", &density_csv(&s.density))?;
    let (m1, m2) = (s.density.moment(1), s.density.moment(2));
    println!("residual {:.3e} after {} iterations; mean {m1:.6}, second moment {m2:.6}", s.residual, s.iterations);
    if cfg.output.wants(OutputFormat::Json) {
        sink.json(
            "stationary.json",
            json!({"residual": s.residual, "iterations": s.iterations, "mean": m1, "second_moment": m2}),
        )?;
    }
    Ok(sink.finish(true))
}

fn classify(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.model()?;
    let verdict = foguel_verdict_with(&model, &cfg.classify)?;
    let mut sink = Sink::new(cfg)?;
    let record = json!({
        "schema_version": SCHEMA_VERSION,
        "model": cfg.model,
        "verdict": verdict.verdict,
        "evidence": verdict.evidence,
    });
    sink.json("verdict.json", record)?;
    println!("verdict: {}", verdict.verdict);
    for e in &verdict.evidence {
        let name = serde_json::to_value(e).ok().and_then(|v| v["source"].as_str().map(str::to_string));
        println!("  {}: {}", name.unwrap_or_default(), e.supports());
    }
    Ok(sink.finish(true))
}

fn sweep(cfg: &RunConfig) -> Result<Outcome> {
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep needs a [sweep] section with a, b, lambda".into()))?;
    let (a_vals, b_vals, l_vals) = (spec.a.values()?, spec.b.values()?, spec.lambda.values()?);
    let mut body = String::from("a,b,lambda,verdict,gamma_witness,c_gamma\n");
    let mut counts = [0usize; 3];
    for &l in &l_vals {
        for &b in &b_vals {
            for &a in &a_vals {
                let c = classify_power_law(a, b, l, spec.tol).map_err(as_config)?;
                let witness = c.gamma_witness.map(|g| format!("{g:.10}")).unwrap_or_default();
                let rate = match (c.verdict, c.gamma_witness) {
                    (VerdictKind::Sweeping, Some(g)) => format!("{:.10e}", sweeping_rate(a, b, l, g)),
                    _ => String::new(),
                };
                let _ = writeln!(body, "{a},{b},{l},{},{witness},{rate}", c.verdict);
                counts[match c.verdict {
                    VerdictKind::Stable => 0,
                    VerdictKind::Sweeping => 1,
                    _ => 2,
                }] += 1;
            }
        }
    }
    let mut sink = Sink::new(cfg)?;
    sink.csv("phase_diagram.csv", &body)?;
    println!("stable {}, sweeping {}, boundary {}", counts[0], counts[1], counts[2]);
    Ok(sink.finish(true))
}
