//! Study artifacts: CSV tables, plot data, summary and manifest. Files are
//! staged in a sibling directory and moved into place only on success.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use wm_core::errors::NormTag;
use wm_core::study::{fit_rate, StudyConfig, StudyOutput};

use crate::config::ConfigEcho;
use crate::CliError;

pub struct Staging {
    dir: PathBuf,
    target: PathBuf,
    names: Vec<String>,
    committed: bool,
}

impl Staging {
    pub fn new(target: &Path) -> Result<Self, CliError> {
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent)?;
        let name = target
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into());
        let dir = parent.join(format!(".{name}.staging-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir(&dir)?;
        Ok(Self {
            dir,
            target: target.to_path_buf(),
            names: Vec::new(),
            committed: false,
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        fs::write(self.dir.join(name), contents)?;
        self.names.push(name.to_string());
        Ok(())
    }

    pub fn final_path(&self, name: &str) -> PathBuf {
        self.target.join(name)
    }

    /// Moves every staged file into the target directory.
    pub fn commit(mut self) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(&self.target)?;
        let mut out = Vec::with_capacity(self.names.len());
        for name in &self.names {
            let dest = self.target.join(name);
            fs::rename(self.dir.join(name), &dest)?;
            out.push(dest);
        }
        fs::remove_dir_all(&self.dir)?;
        self.committed = true;
        Ok(out)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

pub fn errors_csv(out: &StudyOutput) -> String {
    let mut s = String::from("beta,p,norm,level,h,error\n");
    for r in &out.records {
        let _ = writeln!(s, "{},{},{},{},{},{}", r.beta, r.p, r.norm, r.level, r.h, r.error);
    }
    s
}

pub fn rates_csv(out: &StudyOutput) -> String {
    let mut s = String::from("beta,p,norm,observed_rate,expected_rate,within_tolerance\n");
    for f in &out.fits {
        let expected = f.expected_rate.map_or("NA".to_string(), |e| e.to_string());
        let within = f.within_tolerance().map_or("NA".to_string(), |w| w.to_string());
        let _ = writeln!(s, "{},{},{},{},{},{}", f.beta, f.p, f.norm, f.observed_rate, expected, within);
    }
    s
}

pub fn plot_name(study: &str, beta: f64, p: usize, norm: NormTag) -> String {
    format!("{study}_{beta}_{p}_{norm}.dat")
}

/// Two columns `ln h`, `ln err` over all levels.
pub fn plot_data(out: &StudyOutput, beta: f64, p: usize, norm: NormTag) -> String {
    let mut s = String::new();
    for r in out
        .records
        .iter()
        .filter(|r| r.beta == beta && r.p == p && r.norm == norm)
    {
        let _ = writeln!(s, "{} {}", r.h.ln(), r.error.ln());
    }
    s
}

/// Root mean square of the full `H1` norm per level, from the `L2` and
/// gradient seminorm aggregates.
fn full_h1(out: &StudyOutput, beta: f64, p: usize) -> Vec<(u32, f64, f64)> {
    let find = |norm: NormTag, level: u32| {
        out.records
            .iter()
            .find(|r| r.beta == beta && r.p == p && r.norm == norm && r.level == level)
    };
    out.records
        .iter()
        .filter(|r| r.beta == beta && r.p == p && r.norm == NormTag::H1Semi)
        .filter_map(|semi| {
            find(NormTag::L2, semi.level)
                .map(|l2| (semi.level, semi.h, (l2.error.powi(2) + semi.error.powi(2)).sqrt()))
        })
        .collect()
}

pub fn summary(study: &str, cfg: &StudyConfig, out: &StudyOutput) -> String {
    let mut s = format!(
        "{study} study: kappa={}, levels 0..={}, fit on levels {}..={}, seed {}\n\n",
        cfg.kappa, cfg.max_level, cfg.fit_levels.0, cfg.fit_levels.1, cfg.base_seed
    );
    let _ = writeln!(s, "{:<8} {:>2} {:>6} {:>9} {:>9}  within", "norm", "p", "beta", "observed", "expected");
    for f in &out.fits {
        let _ = writeln!(
            s,
            "{:<8} {:>2} {:>6} {:>9.3} {:>9}  {}",
            f.norm.as_str(),
            f.p,
            f.beta,
            f.observed_rate,
            f.expected_rate.map_or("--".into(), |e| format!("{e:.2}")),
            f.within_tolerance().map_or("--", |w| if w { "yes" } else { "no" }),
        );
    }
    let with_both = cfg.norms.contains(&NormTag::L2) && cfg.norms.contains(&NormTag::H1Semi);
    if with_both {
        let _ = writeln!(s, "\nfull H1 norm (root mean square of L2 and gradient parts)");
        let (lo, hi) = cfg.fit_levels;
        for &p in &cfg.degrees {
            for &beta in &cfg.betas {
                let rows = full_h1(out, beta, p);
                let pts: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| (lo..=hi).contains(&r.0))
                    .map(|r| (r.1, r.2))
                    .collect();
                if let Ok(fit) = fit_rate(&pts) {
                    let _ = writeln!(s, "H1full   {p:>2} {beta:>6} {:>9.3}", fit.slope);
                }
            }
        }
    }
    s
}

#[derive(Serialize)]
struct CellEntry<'a> {
    cell: &'a str,
    seconds: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    study: &'a str,
    base_seed: u64,
    threads: usize,
    config: ConfigEcho,
    files: Vec<String>,
    cells: Vec<CellEntry<'a>>,
    total_seconds: f64,
}

/// Writes all artifacts of one study run into `target`.
pub fn write_study(
    study: &str,
    target: &Path,
    cfg: &StudyConfig,
    out: &StudyOutput,
    total_seconds: f64,
) -> Result<Vec<PathBuf>, CliError> {
    let mut stage = Staging::new(target)?;
    stage.write(&format!("{study}_errors.csv"), &errors_csv(out))?;
    stage.write(&format!("{study}_rates.csv"), &rates_csv(out))?;
    for f in &out.fits {
        stage.write(
            &plot_name(study, f.beta, f.p, f.norm),
            &plot_data(out, f.beta, f.p, f.norm),
        )?;
    }
    stage.write(&format!("{study}_summary.txt"), &summary(study, cfg, out))?;

    let mut files: Vec<String> = stage
        .names
        .iter()
        .map(|n| stage.final_path(n).display().to_string())
        .collect();
    files.push(stage.final_path("manifest.json").display().to_string());
    let manifest = Manifest {
        tool: "wm",
        version: env!("CARGO_PKG_VERSION"),
        study,
        base_seed: cfg.base_seed,
        threads: rayon::current_num_threads(),
        config: ConfigEcho::from(cfg),
        files,
        cells: out
            .timings
            .iter()
            .map(|t| CellEntry {
                cell: &t.label,
                seconds: t.seconds,
            })
            .collect(),
        total_seconds,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Config(format!("manifest: {e}")))?;
    stage.write("manifest.json", &json)?;
    stage.commit()
}
