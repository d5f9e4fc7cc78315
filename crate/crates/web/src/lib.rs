//! Browser bindings: harmonic pair curves, heat decay against the free
//! flow, and a damped-wave snapshot next to its parabolic profile.

use decaylab::heatflow::{evolve_heat, TimeLadder};
use decaylab::ratefit::fit_power;
use decaylab::{DecaySeries, Grid, HarmonicPair, ModalWaveEvolver, Potential, Profile, SchrodingerOperator};
use wasm_bindgen::prelude::*;

fn setup(potential: &str, half_width: f64, nodes: usize) -> decaylab::Result<(Grid, Potential)> {
    let grid = Grid::new(half_width, nodes)?;
    let v = Potential::new(potential.parse()?, &grid)?;
    Ok((grid, v))
}

fn js(e: decaylab::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct HarmonicView {
    x: Vec<f64>,
    psi1: Vec<f64>,
    psi2: Vec<f64>,
    k_v: f64,
}

#[wasm_bindgen]
impl HarmonicView {
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }
    pub fn psi1(&self) -> Vec<f64> {
        self.psi1.clone()
    }
    pub fn psi2(&self) -> Vec<f64> {
        self.psi2.clone()
    }
    pub fn k_v(&self) -> f64 {
        self.k_v
    }
}

pub fn harmonic_view(potential: &str, half_width: f64, nodes: usize) -> decaylab::Result<HarmonicView> {
    let (grid, v) = setup(potential, half_width, nodes)?;
    let p = HarmonicPair::solve(&v)?;
    Ok(HarmonicView {
        x: (0..grid.len()).map(|i| grid.x(i)).collect(),
        psi1: p.psi1.values().to_vec(),
        psi2: p.psi2.values().to_vec(),
        k_v: p.k_v,
    })
}

/// The zero-energy pair of `potential` and its Wronskian.
#[wasm_bindgen]
pub fn harmonic(potential: &str, half_width: f64, nodes: usize) -> Result<HarmonicView, JsError> {
    harmonic_view(potential, half_width, nodes).map_err(js)
}

#[wasm_bindgen]
pub struct DecayView {
    t: Vec<f64>,
    with_potential: Vec<f64>,
    free: Vec<f64>,
    exponent: f64,
    free_exponent: f64,
}

#[wasm_bindgen]
impl DecayView {
    pub fn t(&self) -> Vec<f64> {
        self.t.clone()
    }
    pub fn with_potential(&self) -> Vec<f64> {
        self.with_potential.clone()
    }
    pub fn free_flow(&self) -> Vec<f64> {
        self.free.clone()
    }
    pub fn exponent(&self) -> f64 {
        self.exponent
    }
    pub fn free_exponent(&self) -> f64 {
        self.free_exponent
    }
}

/// `‖e^{-tS}f‖₂` for a bump datum, with and without the potential, up to
/// `(L/8)²`, with log-log fits over the last decade.
pub fn heat_view(potential: &str, half_width: f64, nodes: usize) -> decaylab::Result<DecayView> {
    let (grid, v) = setup(potential, half_width, nodes)?;
    let f = Profile::bump().sample(&grid);
    let t1 = (half_width / 8.0).powi(2);
    let t = TimeLadder::spanning(1.0f64.min(t1), t1, 1.25)?.times();
    let curve = |pot: &Potential| -> decaylab::Result<(Vec<f64>, f64)> {
        let dec = SchrodingerOperator::assemble(pot).decompose()?;
        let y = t.iter().map(|&s| evolve_heat(&dec, &f, s).map(|u| u.l2())).collect::<decaylab::Result<Vec<_>>>()?;
        let fit = fit_power(&DecaySeries::new(t.clone(), y.clone())?, Some((t1 / 10.0, t1)))?;
        Ok((y, fit.exponent))
    };
    let (with_potential, exponent) = curve(&v)?;
    let (free, free_exponent) = curve(&Potential::zero(&grid))?;
    Ok(DecayView { t, with_potential, free, exponent, free_exponent })
}

#[wasm_bindgen]
pub fn heat_decay(potential: &str, half_width: f64, nodes: usize) -> Result<DecayView, JsError> {
    heat_view(potential, half_width, nodes).map_err(js)
}

#[wasm_bindgen]
pub struct WaveView {
    x: Vec<f64>,
    wave: Vec<f64>,
    profile: Vec<f64>,
    energy: f64,
}

#[wasm_bindgen]
impl WaveView {
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }
    pub fn wave(&self) -> Vec<f64> {
        self.wave.clone()
    }
    pub fn profile(&self) -> Vec<f64> {
        self.profile.clone()
    }
    pub fn energy(&self) -> f64 {
        self.energy
    }
}

/// `u(t)` for bump position and velocity next to `e^{-tS}(u₀ + u₁)`.
pub fn wave_view(potential: &str, half_width: f64, nodes: usize, t: f64) -> decaylab::Result<WaveView> {
    let (grid, v) = setup(potential, half_width, nodes)?;
    let u0 = Profile::bump().sample(&grid);
    let u1 = Profile::shifted_bump().sample(&grid);
    let dec = SchrodingerOperator::assemble(&v).decompose()?;
    let ev = ModalWaveEvolver::new(&dec, &u0, &u1)?;
    let state = ev.evolve(t)?;
    let profile = evolve_heat(&dec, &(&u0 + &u1), t)?;
    Ok(WaveView {
        x: (0..grid.len()).map(|i| grid.x(i)).collect(),
        wave: state.u.values().to_vec(),
        profile: profile.values().to_vec(),
        energy: ev.energy(t)?,
    })
}

#[wasm_bindgen]
pub fn wave_snapshot(potential: &str, half_width: f64, nodes: usize, t: f64) -> Result<WaveView, JsError> {
    wave_view(potential, half_width, nodes, t).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn views_have_matching_lengths() {
        let h = harmonic_view("inv4", 40.0, 401).unwrap();
        assert_eq!(h.x.len(), h.psi1.len());
        assert!((h.k_v - std::f64::consts::PI).abs() < 0.1);
        let d = heat_view("bump", 40.0, 201).unwrap();
        assert!(d.exponent < d.free_exponent);
        let w = wave_view("bump", 40.0, 201, 3.0).unwrap();
        assert_eq!(w.wave.len(), 201);
        assert!(w.energy > 0.0);
    }

    #[test]
    fn bad_specs_are_errors() {
        assert!(harmonic_view("zero", 40.0, 401).is_err());
        assert!(harmonic_view("wiggly", 40.0, 401).is_err());
        assert!(wave_view("bump", 5.0, 51, 100.0).is_err());
    }
}
