//! Times the full and partial eigendecompositions at a given node count.
//!
//! `cargo run --release --example decompose_timing -- 8001`

use std::time::Instant;

use decaylab::{Grid, Potential, PotentialKind, SchrodingerOperator};

fn main() -> decaylab::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8001);
    let grid = Grid::new(400.0, n)?;
    let op = SchrodingerOperator::assemble(&Potential::new(PotentialKind::InverseQuartic, &grid)?);

    let t = Instant::now();
    let dec = op.decompose()?;
    println!("full: {} pairs in {:.2?}", dec.len(), t.elapsed());
    println!("  residual {:.2e}, orthogonality {:.2e}", dec.max_residual(&op, 97)?, dec.orthogonality_defect(401));

    let t = Instant::now();
    let part = op.decompose_below(0.13)?;
    println!("below 0.13: {} pairs in {:.2?}", part.len(), t.elapsed());
    Ok(())
}
