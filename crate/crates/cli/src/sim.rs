//! Synchronous-update redundancy: on a layered network the synchronous
//! iteration runs two independent half-trajectories, which can settle on
//! different equilibria and then alternate forever.

use ndarray::{array, Array1, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hopdeq::error::Result;
use hopdeq::hopfield::random::{random_input, random_params, random_sizes};
use hopdeq::hopfield::{energy_ham, Architecture, HopfieldMap, MapKind, ModelParams, Nonlinearity, Variant};
use hopdeq::solvers::{relative_residual, FixedPointMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleCheck {
    pub converged: bool,
    pub two_cycle: bool,
    pub iterations: usize,
}

/// Iterates `f` from `s0`. Converged when `rel(s^{n+1}, s^n) < tol`; a
/// 2-cycle is reported when the run never converged but
/// `rel(s^{n+2}, s^n) < tol` at the end.
pub fn detect_two_cycle(f: &dyn FixedPointMap, s0: ArrayView1<f64>, max_iters: usize, tol: f64) -> CycleCheck {
    let mut prev = s0.to_owned();
    let mut cur = f.apply(prev.view());
    for n in 1..=max_iters {
        if relative_residual(cur.view(), prev.view()) < tol {
            return CycleCheck {
                converged: true,
                two_cycle: false,
                iterations: n,
            };
        }
        if n == max_iters {
            break;
        }
        let next = f.apply(cur.view());
        prev = cur;
        cur = next;
    }
    let next = f.apply(cur.view());
    CycleCheck {
        converged: false,
        two_cycle: relative_residual(next.view(), prev.view()) < tol,
        iterations: max_iters,
    }
}

/// Natural-order state with the odd layers at zero and the even layers set
/// by `eo_init`, so the first synchronous step leaves the even half unchanged.
pub fn eo_init_state(map: &HopfieldMap<'_>) -> Result<Array1<f64>> {
    let eo = map.even_odd();
    let layout = map.params().layout();
    let odd = Array1::zeros(eo.odd_dim());
    let even = eo.eo_init(odd.view())?;
    Ok(layout.unpermute(layout.join(even.view(), odd.view()).view()))
}

/// Identity activation, one hidden unit in each of two layers, coupled
/// with weight 1 and biased in opposite directions. From zero the
/// synchronous iteration alternates between `(0, 0)` and `(1, -1)`.
pub fn oscillating_instance() -> (ModelParams, Array1<f64>) {
    let arch = Architecture::new(vec![1, 1, 1]).expect("valid sizes");
    let mut p = ModelParams::zeros(arch, Variant::Ham).with_nonlinearity(Nonlinearity::identity());
    p.blocks[0] = array![[1.0]];
    p.blocks[1] = array![[1.0]];
    p.biases[0] = array![0.0];
    p.biases[1] = array![-1.0];
    (p, array![1.0])
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimReport {
    pub instances: usize,
    pub sync_converged: usize,
    /// 2-cycles of the synchronous iteration from zero.
    pub sync_two_cycles: usize,
    /// 2-cycles of the synchronous iteration from the even-odd init.
    pub eo_init_two_cycles: usize,
    pub fused_converged: usize,
    /// Instances with a synchronous 2-cycle where the fused scheme converged
    /// and its energy never increased.
    pub fused_resolved_cycles: usize,
    pub constructed_two_cycle: bool,
    pub constructed_eo_init_two_cycle: bool,
}

/// Energy of a fused-scheme state, evaluated on the implied full state.
fn fused_energy(map: &HopfieldMap<'_>, x: ArrayView1<f64>, even: ArrayView1<f64>) -> Result<f64> {
    energy_ham(map.full_state(even).view(), map.params(), x)
}

fn fused_run(map: &HopfieldMap<'_>, x: ArrayView1<f64>, max_iters: usize, tol: f64) -> Result<(bool, bool)> {
    let mut e = map.initial_state();
    let mut energy = fused_energy(map, x, e.view())?;
    let mut monotone = true;
    for _ in 0..max_iters {
        let next = map.apply(e.view());
        let next_energy = fused_energy(map, x, next.view())?;
        monotone &= next_energy <= energy + 1e-9 * energy.abs().max(1.0);
        let done = relative_residual(next.view(), e.view()) < tol;
        e = next;
        energy = next_energy;
        if done {
            return Ok((true, monotone));
        }
    }
    Ok((false, monotone))
}

/// Random strongly coupled HAMs: synchronous from zero, synchronous from the
/// even-odd init and the fused scheme, plus the constructed oscillator.
pub fn run_sync_redundancy_sim(instances: usize, seed: u64, max_iters: usize, tol: f64) -> Result<SimReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SimReport {
        instances,
        ..SimReport::default()
    };
    for _ in 0..instances {
        let layers = rng.random_range(3..=5);
        let sizes = random_sizes(&mut rng, &[8, 10, 10, 10, 10][..layers]);
        let scale = rng.random_range(2.0..10.0);
        let p = random_params(&mut rng, &sizes, Variant::Ham, scale);
        let x = random_input(&mut rng, sizes[0]);
        let sync = HopfieldMap::new(MapKind::HamSync, &p, x.view())?;
        let zero = detect_two_cycle(&sync, sync.initial_state().view(), max_iters, tol);
        let init = eo_init_state(&sync)?;
        let from_init = detect_two_cycle(&sync, init.view(), max_iters, tol);
        let fused = HopfieldMap::new(MapKind::HamFused, &p, x.view())?;
        let (fused_ok, monotone) = fused_run(&fused, x.view(), max_iters, tol)?;

        report.sync_converged += zero.converged as usize;
        report.sync_two_cycles += zero.two_cycle as usize;
        report.eo_init_two_cycles += from_init.two_cycle as usize;
        report.fused_converged += fused_ok as usize;
        report.fused_resolved_cycles += (zero.two_cycle && fused_ok && monotone) as usize;
    }

    let (p, x) = oscillating_instance();
    let sync = HopfieldMap::new(MapKind::HamSync, &p, x.view())?;
    report.constructed_two_cycle = detect_two_cycle(&sync, sync.initial_state().view(), 100, tol).two_cycle;
    let init = eo_init_state(&sync)?;
    report.constructed_eo_init_two_cycle = detect_two_cycle(&sync, init.view(), 100, tol).two_cycle;
    Ok(report)
}
