//! Analytic vector-Jacobian products of the DEQ maps and recurrent backpropagation.

use ndarray::{Array1, Array2, ArrayView1, Axis, Zip};

use crate::error::{check_len, Error, Result};
use crate::hopfield::deq::{affine_drive, hidden_coupling, layer_activations, split_layers};
use crate::hopfield::{HopfieldMap, MapKind, ModelParams, ParamGrads};
use crate::solvers::FixedPointMap;

/// Per-layer cotangents and activations from which parameter gradients follow:
/// `dW_0 = c_1 a_0^T`, `dW_k = c_{k+1} a_k^T + a_{k+1} c_k^T`, `db_k = c_k`.
/// `cot[0]` is unused and `act[0] = rho(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCotangents {
    pub cot: Vec<Array1<f64>>,
    pub act: Vec<Array1<f64>>,
}

impl LayerCotangents {
    pub fn param_grads(&self) -> ParamGrads {
        batch_param_grads(std::slice::from_ref(self))
    }
}

/// Sums the parameter gradients of many samples with one GEMM per term.
pub fn batch_param_grads(items: &[LayerCotangents]) -> ParamGrads {
    assert!(!items.is_empty(), "batch_param_grads needs at least one sample");
    let num_layers = items[0].act.len();
    let stack = |get: &dyn Fn(&LayerCotangents) -> &Array1<f64>| -> Array2<f64> {
        let n = get(&items[0]).len();
        let mut m = Array2::zeros((items.len(), n));
        for (row, item) in m.axis_iter_mut(Axis(0)).zip(items) {
            let mut row = row;
            row.assign(get(item));
        }
        m
    };
    let cots: Vec<Array2<f64>> = (0..num_layers).map(|k| stack(&|c| &c.cot[k])).collect();
    let acts: Vec<Array2<f64>> = (0..num_layers).map(|k| stack(&|c| &c.act[k])).collect();
    let mut blocks = Vec::with_capacity(num_layers - 1);
    for k in 0..num_layers - 1 {
        let mut g = cots[k + 1].t().dot(&acts[k]);
        if k >= 1 {
            g += &acts[k + 1].t().dot(&cots[k]);
        }
        blocks.push(g);
    }
    let biases = (1..num_layers).map(|k| cots[k].sum_axis(Axis(0))).collect();
    ParamGrads { blocks, biases }
}

enum Jacobian {
    HamSync {
        rho_prime: Array1<f64>,
    },
    ChnSync {
        rho_prime: Array1<f64>,
        /// `rho''(s) * a(s)`, the diagonal of the Jacobian's elementwise part.
        curvature: Array1<f64>,
    },
    HamFused {
        rho_prime_even: Array1<f64>,
        rho_prime_odd: Array1<f64>,
        act_even: Array1<f64>,
        act_odd: Array1<f64>,
    },
}

/// A DEQ map linearised at a solver state.
///
/// The even-odd CHN map is linearised through the synchronous CHN map: both
/// share their fixed points, so the implicit gradients at an equilibrium agree.
pub struct Linearization<'m, 'a> {
    map: &'m HopfieldMap<'a>,
    act: Vec<Array1<f64>>,
    jac: Jacobian,
}

impl<'m, 'a> Linearization<'m, 'a> {
    pub fn at(map: &'m HopfieldMap<'a>, state: ArrayView1<f64>) -> Result<Self> {
        check_len("solver state", map.dim(), state.len())?;
        let p = map.params();
        let nl = p.nonlinearity;
        let rho_prime = || state.mapv(nl.derivative);
        Ok(match map.kind() {
            MapKind::HamSync => Self {
                map,
                act: layer_activations(p, state),
                jac: Jacobian::HamSync { rho_prime: rho_prime() },
            },
            MapKind::ChnSync | MapKind::ChnEvenOdd => {
                let act = layer_activations(p, state);
                let mut curvature = affine_drive(p, &act, map.input());
                Zip::from(&mut curvature)
                    .and(&state)
                    .for_each(|c, &s| *c *= nl.rho_second(s));
                Self {
                    map,
                    act,
                    jac: Jacobian::ChnSync {
                        rho_prime: rho_prime(),
                        curvature,
                    },
                }
            }
            MapKind::HamFused => {
                let odd = map.even_odd().odd_update_ham(state, map.input());
                let layout = p.layout();
                let act_even = state.mapv(nl.evaluate);
                let act_odd = odd.mapv(nl.evaluate);
                let full = layout.unpermute(layout.join(act_even.view(), act_odd.view()).view());
                Self {
                    map,
                    act: split_layers(p, full.view()),
                    jac: Jacobian::HamFused {
                        rho_prime_even: rho_prime(),
                        rho_prime_odd: odd.mapv(nl.derivative),
                        act_even,
                        act_odd,
                    },
                }
            }
        })
    }

    fn params(&self) -> &'a ModelParams {
        self.map.params()
    }

    /// `J^T v`.
    pub fn state_vjp(&self, v: ArrayView1<f64>) -> Array1<f64> {
        let p = self.params();
        match &self.jac {
            Jacobian::HamSync { rho_prime } => {
                rho_prime * &hidden_coupling(p, &split_layers(p, v))
            }
            Jacobian::ChnSync { rho_prime, curvature } => {
                let scaled = rho_prime * &v;
                let mut out = rho_prime * &hidden_coupling(p, &split_layers(p, scaled.view()));
                Zip::from(&mut out)
                    .and(curvature)
                    .and(&v)
                    .for_each(|o, &c, &vi| *o += c * vi);
                out
            }
            Jacobian::HamFused {
                rho_prime_even,
                rho_prime_odd,
                ..
            } => {
                let eo = self.map.even_odd();
                let inner = rho_prime_odd * &eo.w_p_mul(v);
                rho_prime_even * &eo.w_p_t_mul(inner.view())
            }
        }
    }

    /// Parameter-side VJP `u^T df/dtheta`, in per-layer form.
    pub fn cotangents(&self, u: ArrayView1<f64>) -> LayerCotangents {
        let p = self.params();
        let full_cot = match &self.jac {
            Jacobian::HamSync { .. } => u.to_owned(),
            Jacobian::ChnSync { rho_prime, .. } => rho_prime * &u,
            Jacobian::HamFused { rho_prime_odd, .. } => {
                let eo = self.map.even_odd();
                let q = rho_prime_odd * &eo.w_p_mul(u);
                let layout = p.layout();
                layout.unpermute(layout.join(u, q.view()).view())
            }
        };
        let mut act = self.act.clone();
        act[0] = self.map.input_activation().clone();
        LayerCotangents {
            cot: split_layers(p, full_cot.view()),
            act,
        }
    }

    /// `rho(s_even)` and `rho(s_odd)` at a fused state.
    pub fn fused_activations(&self) -> Option<(&Array1<f64>, &Array1<f64>)> {
        match &self.jac {
            Jacobian::HamFused { act_even, act_odd, .. } => Some((act_even, act_odd)),
            _ => None,
        }
    }
}

/// `v^T (df/ds)(s)` for the named map at state `s` of sample `x`.
pub fn deq_vjp(
    kind: MapKind,
    s: ArrayView1<f64>,
    v: ArrayView1<f64>,
    p: &ModelParams,
    x: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    if kind == MapKind::ChnEvenOdd {
        return Err(Error::InvalidConfig(
            "the even-odd CHN map has no closed-form VJP; linearise chn_sync instead".into(),
        ));
    }
    let map = HopfieldMap::new(kind, p, x)?;
    check_len("cotangent", map.dim(), v.len())?;
    Ok(Linearization::at(&map, s)?.state_vjp(v))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackpropConfig {
    pub iters: usize,
    pub damping: f64,
}

impl Default for BackpropConfig {
    fn default() -> Self {
        Self { iters: 8, damping: 1.0 }
    }
}

/// Exactly `iters` damped Picard steps on `u = J^T u + g`, starting from `u = g`.
pub fn adjoint_picard(
    vjp: impl Fn(ArrayView1<f64>) -> Array1<f64>,
    g: ArrayView1<f64>,
    cfg: BackpropConfig,
) -> Result<Array1<f64>> {
    let mut u = g.to_owned();
    let beta = cfg.damping;
    for iteration in 1..=cfg.iters {
        let ju = vjp(u.view());
        Zip::from(&mut u)
            .and(&ju)
            .and(&g)
            .for_each(|ui, &j, &gi| *ui = (1.0 - beta) * *ui + beta * (j + gi));
        if u.iter().any(|v| !v.is_finite()) {
            let max_abs = u.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
            return Err(Error::NonFiniteAdjoint { iteration, max_abs });
        }
    }
    Ok(u)
}

/// Adjoint solve at an equilibrium followed by the parameter-side VJP, as
/// per-layer cotangents ready for batching.
pub fn recurrent_backprop_cotangents(
    map: &HopfieldMap<'_>,
    state: ArrayView1<f64>,
    grad_state: ArrayView1<f64>,
    cfg: BackpropConfig,
) -> Result<LayerCotangents> {
    check_len("state gradient", map.dim(), grad_state.len())?;
    let lin = Linearization::at(map, state)?;
    let u = adjoint_picard(|v| lin.state_vjp(v), grad_state, cfg)?;
    Ok(lin.cotangents(u.view()))
}

/// Parameter gradients of a loss whose gradient with respect to the
/// equilibrium `state` is `grad_state`.
pub fn recurrent_backprop(
    map: &HopfieldMap<'_>,
    state: ArrayView1<f64>,
    grad_state: ArrayView1<f64>,
    cfg: BackpropConfig,
) -> Result<ParamGrads> {
    Ok(recurrent_backprop_cotangents(map, state, grad_state, cfg)?.param_grads())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hopfield::random::{contractive_params, random_input, random_params, random_state};
    use crate::hopfield::{Architecture, Nonlinearity, Variant};
    use crate::solvers::{picard_solve, SolverConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fd_state_vjp(map: &HopfieldMap, s: &Array1<f64>, v: &Array1<f64>) -> Array1<f64> {
        let h = 1e-6;
        Array1::from_shape_fn(s.len(), |i| {
            let mut plus = s.clone();
            plus[i] += h;
            let mut minus = s.clone();
            minus[i] -= h;
            v.dot(&(map.apply(plus.view()) - map.apply(minus.view()))) / (2.0 * h)
        })
    }

    fn rel_err(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
        let num = (a - b).mapv(|d| d * d).sum().sqrt();
        let den = b.mapv(|d| d * d).sum().sqrt().max(1e-12);
        num / den
    }

    #[test]
    fn state_vjps_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for kind in [MapKind::HamSync, MapKind::ChnSync, MapKind::HamFused] {
            for sizes in [vec![4, 5, 3], vec![3, 4, 3, 5, 2]] {
                let p = random_params(&mut rng, &sizes, kind.variant(), 1.2);
                let x = random_input(&mut rng, sizes[0]);
                let map = HopfieldMap::new(kind, &p, x.view()).unwrap();
                let s = random_state(&mut rng, map.dim(), 1.0);
                let v = random_state(&mut rng, map.dim(), 1.0);
                let vjp = Linearization::at(&map, s.view()).unwrap().state_vjp(v.view());
                let err = rel_err(&vjp, &fd_state_vjp(&map, &s, &v));
                assert!(err < 1e-5, "{kind} {sizes:?}: {err}");
            }
        }
    }

    #[test]
    fn parameter_cotangents_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = 1e-6;
        for kind in [MapKind::HamSync, MapKind::ChnSync, MapKind::HamFused] {
            let sizes = [3, 4, 3, 2, 3];
            let p = random_params(&mut rng, &sizes, kind.variant(), 1.0);
            let x = random_input(&mut rng, 3);
            let map = HopfieldMap::new(kind, &p, x.view()).unwrap();
            let s = random_state(&mut rng, map.dim(), 1.0);
            let u = random_state(&mut rng, map.dim(), 1.0);
            let grads = Linearization::at(&map, s.view()).unwrap().cotangents(u.view()).param_grads();
            let objective = |q: &ModelParams| {
                let m = HopfieldMap::new(kind, q, x.view()).unwrap();
                u.dot(&m.apply(s.view()))
            };
            for (bi, block) in p.blocks.iter().enumerate() {
                for ((r, c), _) in block.indexed_iter() {
                    let mut plus = p.clone();
                    plus.blocks[bi][[r, c]] += h;
                    let mut minus = p.clone();
                    minus.blocks[bi][[r, c]] -= h;
                    let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
                    let an = grads.blocks[bi][[r, c]];
                    assert!((fd - an).abs() < 1e-6 * (1.0 + fd.abs()), "{kind} W{bi}[{r},{c}] {an} vs {fd}");
                }
            }
            for (bi, bias) in p.biases.iter().enumerate() {
                for i in 0..bias.len() {
                    let mut plus = p.clone();
                    plus.biases[bi][i] += h;
                    let mut minus = p.clone();
                    minus.biases[bi][i] -= h;
                    let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
                    assert!((fd - grads.biases[bi][i]).abs() < 1e-6 * (1.0 + fd.abs()), "{kind} b{bi}[{i}]");
                }
            }
        }
    }

    #[test]
    fn vjp_is_zero_without_coupling_and_linear_in_v() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = random_params(&mut rng, &[3, 4, 3], Variant::Ham, 1.0);
        let x = random_input(&mut rng, 3);
        let s = random_state(&mut rng, 7, 1.0);
        let v = random_state(&mut rng, 7, 1.0);
        let w = random_state(&mut rng, 7, 1.0);
        let a = deq_vjp(MapKind::HamSync, s.view(), v.view(), &p, x.view()).unwrap();
        let b = deq_vjp(MapKind::HamSync, s.view(), w.view(), &p, x.view()).unwrap();
        let combo = &v * 2.0 - &w * 0.5;
        let c = deq_vjp(MapKind::HamSync, s.view(), combo.view(), &p, x.view()).unwrap();
        assert!((&c - &(&a * 2.0 - &b * 0.5)).iter().all(|d| d.abs() < 1e-14));
        p.blocks[1].fill(0.0);
        let z = deq_vjp(MapKind::HamSync, s.view(), v.view(), &p, x.view()).unwrap();
        assert!(z.iter().all(|&d| d == 0.0));
        assert!(deq_vjp(MapKind::ChnEvenOdd, s.view(), v.view(), &p.with_variant(Variant::Chn), x.view()).is_err());
    }

    #[test]
    fn linear_adjoint_matches_closed_form() {
        // identity rho: f(s) = W~ s + b~ + W_0 x, so dL/db = (I - W~)^-T s*
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = contractive_params(&mut rng, &[1, 2, 1], Variant::Ham, 0.5)
            .with_nonlinearity(Nonlinearity::identity());
        let x = random_input(&mut rng, 1);
        let map = HopfieldMap::new(MapKind::HamSync, &p, x.view()).unwrap();
        let sol = picard_solve(&map, map.initial_state().view(), &SolverConfig::picard(500, 1e-15)).unwrap();
        let s = sol.equilibrium;
        let grads = recurrent_backprop(&map, s.view(), s.view(), BackpropConfig { iters: 50, damping: 1.0 }).unwrap();
        let w = p.dense_hidden_weights();
        let a = Array2::<f64>::eye(3) - &w;
        // solve (I - W)^T u = s by Cramer's rule on the 3x3 system
        let det = |m: &Array2<f64>| {
            m[[0, 0]] * (m[[1, 1]] * m[[2, 2]] - m[[1, 2]] * m[[2, 1]])
                - m[[0, 1]] * (m[[1, 0]] * m[[2, 2]] - m[[1, 2]] * m[[2, 0]])
                + m[[0, 2]] * (m[[1, 0]] * m[[2, 1]] - m[[1, 1]] * m[[2, 0]])
        };
        let at = a.t().to_owned();
        let d = det(&at);
        let expected: Vec<f64> = (0..3)
            .map(|c| {
                let mut m = at.clone();
                m.column_mut(c).assign(&s);
                det(&m) / d
            })
            .collect();
        let got: Vec<f64> = grads.biases.iter().flat_map(|b| b.iter().copied()).collect();
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-8, "{g} vs {e}");
        }
    }

    #[test]
    fn zero_loss_gradient_gives_zero_parameter_gradients() {
        let p = ModelParams::zeros(Architecture::new(vec![2, 3, 2]).unwrap(), Variant::Ham);
        let x = Array1::from_vec(vec![0.3, 0.6]);
        let map = HopfieldMap::new(MapKind::HamSync, &p, x.view()).unwrap();
        let g = recurrent_backprop(&map, Array1::zeros(5).view(), Array1::zeros(5).view(), BackpropConfig::default()).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn batched_gradients_equal_sum_of_singles() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_params(&mut rng, &[4, 5, 3, 2], Variant::Ham, 1.0);
        let items: Vec<LayerCotangents> = (0..6)
            .map(|_| {
                let x = random_input(&mut rng, 4);
                let map = HopfieldMap::new(MapKind::HamSync, &p, x.view()).unwrap();
                let s = random_state(&mut rng, 10, 1.0);
                let u = random_state(&mut rng, 10, 1.0);
                Linearization::at(&map, s.view()).unwrap().cotangents(u.view())
            })
            .collect();
        let batched = batch_param_grads(&items);
        let mut summed = ParamGrads::zeros_like(&p);
        for item in &items {
            summed.add_assign(&item.param_grads());
        }
        for (a, b) in batched.blocks.iter().zip(&summed.blocks) {
            assert!((a - b).iter().all(|d| d.abs() < 1e-12));
        }
        for (a, b) in batched.biases.iter().zip(&summed.biases) {
            assert!((a - b).iter().all(|d| d.abs() < 1e-12));
        }
    }

    #[test]
    fn non_finite_adjoint_is_reported() {
        let g = Array1::from_vec(vec![1.0]);
        let err = adjoint_picard(|u| u.mapv(|v| v * 1e300), g.view(), BackpropConfig { iters: 5, damping: 1.0 })
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteAdjoint { iteration: 2, .. }));
    }
}
