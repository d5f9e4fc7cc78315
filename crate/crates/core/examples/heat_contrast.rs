//! L² decay of the heat flow for a bump datum, with a potential and without.

use decaylab::heatflow::{l2_decay_study, TimeLadder};
use decaylab::{Grid, HarmonicPair, Potential, Profile, SchrodingerOperator};

fn main() -> decaylab::Result<()> {
    let grid = Grid::new(200.0, 2001)?;
    let f = Profile::bump().sample(&grid);
    let t1 = (grid.half_width() / 8.0).powi(2);
    let times = TimeLadder::spanning(1.0, t1, 1.25)?.times();
    let window = Some((t1 / 10.0, t1));

    let v = Potential::new("inv4".parse()?, &grid)?;
    let pair = HarmonicPair::solve(&v)?;
    let dec = SchrodingerOperator::assemble(&v).decompose()?;
    let with_v = l2_decay_study(Some(&pair), &dec, &f, &times, window)?;

    let free = SchrodingerOperator::assemble(&Potential::zero(&grid)).decompose()?;
    let without = l2_decay_study(None, &free, &f, &times, window)?;

    for (name, s) in [("V = (1+x²)^-2", &with_v), ("V = 0", &without)] {
        println!("{name:>14}: exponent {:+.4} ± {:.4}", s.fit.exponent, s.fit.half_width);
    }
    Ok(())
}
