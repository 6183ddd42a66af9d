use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use nalgebra::DVector;
use wm_core::errors::{EvalGrid, GridBasis};
use wm_core::fem1d::{assemble_mass, assemble_stiffness, build_mesh, make_fespace};
use wm_core::fracop::{calibrate_k, sample_coeffs, split_beta, SincRule};
use wm_core::spectral::{align_signs, assemble_r, solve_discrete_eigs};
use wm_core::study::{check_regularity, draw_xi, DEFAULT_SEED};

use crate::config::env_seed;
use crate::output::Staging;
use crate::{config_error, CliError};

#[derive(Args)]
pub struct SampleArgs {
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 3)]
    level: u32,
    #[arg(long, default_value_t = 1)]
    p: usize,
    /// Defaults to `WM_SEED`, then to the study default.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 9)]
    n0: usize,
    #[arg(long, default_value_t = 0.5)]
    kappa: f64,
    #[arg(long = "n-ok", default_value_t = 1001)]
    n_ok: usize,
    /// Output file; the coefficient vector goes to `<out>.coeffs`.
    #[arg(long, default_value = "sample.dat")]
    out: PathBuf,
}

pub fn run(args: &SampleArgs) -> Result<(), CliError> {
    check_regularity(args.beta).map_err(|e| CliError::Config(format!("beta: {}", config_error(e))))?;
    let seed = match args.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(DEFAULT_SEED),
    };
    let fe = make_fespace(build_mesh(args.n0, args.level)?, args.p)?;
    let m = assemble_mass(&fe);
    let l = assemble_stiffness(&fe, args.kappa);
    let basis = align_signs(solve_discrete_eigs(&l, &m)?, &fe)?;
    let r = assemble_r(&m, &basis);
    let xi = draw_xi(seed, 0, fe.n_dofs());
    let b = r * DVector::from_vec(xi);

    let frac = split_beta(args.beta)?;
    let rule = if frac.is_integer() {
        None
    } else {
        Some(SincRule::new(frac.beta_star, calibrate_k(fe.h(), args.beta)?)?)
    };
    let z = sample_coeffs(frac, rule.as_ref(), &m, &l, &b)?;

    let grid = EvalGrid::new(args.n_ok)?;
    let values = GridBasis::new(&fe, &grid)?.eval(z.as_slice());
    let mut field = String::new();
    for (x, v) in grid.nodes().iter().zip(&values) {
        let _ = writeln!(field, "{x} {v}");
    }
    let mut coeffs = String::new();
    for c in z.iter() {
        let _ = writeln!(coeffs, "{c}");
    }

    let (dir, name) = split_path(&args.out);
    let mut stage = Staging::new(&dir)?;
    stage.write(&name, &field)?;
    stage.write(&format!("{name}.coeffs"), &coeffs)?;
    let written = stage.commit()?;
    for w in written {
        println!("wrote {}", w.display());
    }
    Ok(())
}

fn split_path(path: &std::path::Path) -> (PathBuf, String) {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sample.dat".into());
    (dir, name)
}
