//! Finite-difference check of the whole objective on a tiny model,
//! followed by a deliberately broken backward pass.

use haucl::gradcheck::gradcheck_tiny;
use haucl::RunConfig;

fn main() -> haucl::Result<()> {
    let cfg = RunConfig::tiny();
    let report = gradcheck_tiny(&cfg, None)?;
    println!("{report}");
    let mut worst: Vec<_> = report.params.iter().collect();
    worst.sort_by(|a, b| b.max_rel_error.total_cmp(&a.max_rel_error));
    for p in worst.iter().take(5) {
        println!("  {:<24} {:.3e}", p.name, p.max_rel_error);
    }
    println!("{}", gradcheck_tiny(&cfg, Some("softmax"))?);
    Ok(())
}
