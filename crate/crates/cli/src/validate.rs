use clap::Args;
use wm_core::study::{run_validation, ValidationOptions};

use crate::CliError;

#[derive(Args)]
pub struct ValidateArgs {
    /// Levels 0..=2 only.
    #[arg(long)]
    quick: bool,
    /// Flips one aligned eigenvector before the eigen suite measures it.
    #[arg(long, hide = true)]
    inject_sign_fault: bool,
}

pub fn run(args: &ValidateArgs) -> Result<(), CliError> {
    let results = run_validation(ValidationOptions {
        quick: args.quick,
        inject_sign_flip: args.inject_sign_fault,
    })?;
    println!("{:<14} {:<6} detail", "suite", "result");
    for r in &results {
        println!(
            "{:<14} {:<6} {}",
            r.name,
            if r.passed { "pass" } else { "FAIL" },
            r.detail
        );
    }
    let failed: Vec<&'static str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::ValidationFailed(failed))
    }
}
