//! Monte Carlo engine for the maximal trajectory on a finite torus, and
//! deterministic half-space interface runs.
//!
//! Torus densities are sanity checks, not rigorous bounds. The noise at a
//! site is a pure function of (seed, replica, t, site, lane), so runs are
//! reproducible bit for bit and common random numbers couple different
//! noise levels monotonically.
//!
//! States are bit-packed, 64 sites per word along the first axis; a naive
//! per-site evaluator serves as the correctness oracle for the word-level
//! path and as the fallback when the side is not a multiple of 64.

use num_traits::{Signed, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::automaton::{MonotoneMap, NoisyAutomaton};
use crate::geometry::LinearForm;
use crate::rat::{to_f64, Rat};
use crate::rng::{hash_words, unit_f64};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("torus side {side} too small for neighborhood radius {radius} (need >= 4*radius)")]
    TorusTooSmall { side: usize, radius: i64 },
    #[error("dimension mismatch between automaton and lattice")]
    DimensionMismatch,
    #[error("window too small: the interface left the measurable core")]
    WindowTooSmall,
    #[error("half-space run needs a nonzero form")]
    ZeroForm,
}

/// Bit-packed occupancy state on the torus (Z/L)^d.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorusState {
    side: usize,
    dim: usize,
    rows: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl TorusState {
    pub fn all_ones(side: usize, dim: usize) -> Self {
        let rows = side.pow(dim as u32 - 1);
        let words_per_row = side.div_ceil(64);
        let mut state = TorusState { side, dim, rows, words_per_row, bits: vec![0; rows * words_per_row] };
        for row in 0..rows {
            for w in 0..words_per_row {
                state.bits[row * words_per_row + w] = state.word_mask(w);
            }
        }
        state
    }

    pub fn all_zeros(side: usize, dim: usize) -> Self {
        let rows = side.pow(dim as u32 - 1);
        let words_per_row = side.div_ceil(64);
        TorusState { side, dim, rows, words_per_row, bits: vec![0; rows * words_per_row] }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn word_mask(&self, w: usize) -> u64 {
        let hi = ((w + 1) * 64).min(self.side);
        let lo = w * 64;
        if hi - lo == 64 {
            !0
        } else {
            (1u64 << (hi - lo)) - 1
        }
    }

    fn row_of(&self, coords: &[i64]) -> usize {
        // coords beyond the first axis, little-endian strides
        let mut row = 0usize;
        let mut stride = 1usize;
        for a in 1..self.dim {
            let c = coords[a].rem_euclid(self.side as i64) as usize;
            row += c * stride;
            stride *= self.side;
        }
        row
    }

    pub fn get(&self, coords: &[i64]) -> bool {
        let x0 = coords[0].rem_euclid(self.side as i64) as usize;
        let row = self.row_of(coords);
        self.bits[row * self.words_per_row + x0 / 64] >> (x0 % 64) & 1 == 1
    }

    pub fn set(&mut self, coords: &[i64], value: bool) {
        let x0 = coords[0].rem_euclid(self.side as i64) as usize;
        let row = self.row_of(coords);
        let idx = row * self.words_per_row + x0 / 64;
        if value {
            self.bits[idx] |= 1 << (x0 % 64);
        } else {
            self.bits[idx] &= !(1 << (x0 % 64));
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn density(&self) -> f64 {
        self.count_ones() as f64 / (self.side.pow(self.dim as u32)) as f64
    }

    /// Sitewise `self <= other`.
    pub fn dominated_by(&self, other: &TorusState) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0)
    }

    fn site_index(&self, row: usize, x0: usize) -> u64 {
        (row * self.side + x0) as u64
    }

    /// Decodes a row index back into coordinates 1..dim.
    fn row_coords(&self, mut row: usize) -> Vec<i64> {
        let mut coords = vec![0i64; self.dim];
        for a in 1..self.dim {
            coords[a] = (row % self.side) as i64;
            row /= self.side;
        }
        coords
    }
}

fn offset_row_delta(state: &TorusState, offset: &[i64]) -> i64 {
    let mut delta = 0i64;
    let mut stride = 1i64;
    for a in 1..state.dim {
        delta += offset[a].rem_euclid(state.side as i64) * stride;
        stride *= state.side as i64;
    }
    delta
}

/// Circularly shifted word read: bit b of the result is the row bit at
/// position (w*64 + b + shift) mod side. Requires side % 64 == 0.
fn gather_word(row: &[u64], words: usize, w: usize, shift: i64, side: usize) -> u64 {
    let shift = shift.rem_euclid(side as i64) as usize;
    let (q, r) = (shift / 64, shift % 64);
    let a = row[(w + q) % words];
    if r == 0 {
        a
    } else {
        let b = row[(w + q + 1) % words];
        (a >> r) | (b << (64 - r))
    }
}

fn eval_map_word(
    state: &TorusState,
    map: &MonotoneMap,
    row: usize,
    w: usize,
    row_deltas: &[Vec<i64>],
) -> u64 {
    let wpr = state.words_per_row;
    let mut out = 0u64;
    for (si, one_set) in map.one_sets().iter().enumerate() {
        let mut acc = !0u64;
        for (mi, member) in one_set.members().iter().enumerate() {
            let nrow = (row as i64 + row_deltas[si][mi]).rem_euclid(state.rows as i64) as usize;
            let row_slice = &state.bits[nrow * wpr..(nrow + 1) * wpr];
            acc &= gather_word(row_slice, wpr, w, member[0], state.side);
            if acc == 0 {
                break;
            }
        }
        out |= acc;
        if out == !0 {
            break;
        }
    }
    out
}

fn pick_map(cum: &[f64], u: f64) -> usize {
    cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
}

/// One synchronous step of the noisy automaton. Each site becomes 0 with
/// probability p, otherwise applies a map drawn from the intrinsic
/// distribution to the previous slice with periodic wrap. Noise lanes:
/// 0 = defect uniform, 1 = map choice uniform.
pub fn step(
    state: &TorusState,
    automaton: &NoisyAutomaton,
    seed: u64,
    replica: u64,
    t: u64,
) -> Result<TorusState, SimError> {
    if automaton.family.dimension() != state.dim {
        return Err(SimError::DimensionMismatch);
    }
    let radius = automaton.family.radius();
    if (state.side as i64) < 4 * radius.max(1) {
        return Err(SimError::TorusTooSmall { side: state.side, radius });
    }
    if state.side % 64 == 0 {
        Ok(step_bulk(state, automaton, seed, replica, t))
    } else {
        Ok(step_naive(state, automaton, seed, replica, t))
    }
}

fn step_bulk(state: &TorusState, automaton: &NoisyAutomaton, seed: u64, replica: u64, t: u64) -> TorusState {
    let p = automaton.noise;
    let probs = automaton.family.intrinsic_f64();
    let mut cum = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for q in &probs {
        acc += q;
        cum.push(acc);
    }
    let maps = automaton.family.maps();
    // per map, per one-set, per member: row delta
    let row_deltas: Vec<Vec<Vec<i64>>> = maps
        .iter()
        .map(|m| {
            m.one_sets()
                .iter()
                .map(|s| s.members().iter().map(|mem| offset_row_delta(state, mem)).collect())
                .collect()
        })
        .collect();

    let mut next = state.clone();
    let wpr = state.words_per_row;
    for row in 0..state.rows {
        for w in 0..wpr {
            let vals: Vec<u64> = (0..maps.len())
                .map(|k| eval_map_word(state, &maps[k], row, w, &row_deltas[k]))
                .collect();
            let mut out = 0u64;
            for b in 0..64usize.min(state.side - w * 64) {
                let site = state.site_index(row, w * 64 + b);
                let u0 = unit_f64(hash_words(seed, &[replica, t, site, 0]));
                if u0 < p {
                    continue;
                }
                let k = if maps.len() == 1 {
                    0
                } else {
                    pick_map(&cum, unit_f64(hash_words(seed, &[replica, t, site, 1])))
                };
                out |= (vals[k] >> b & 1) << b;
            }
            next.bits[row * wpr + w] = out;
        }
    }
    next
}

fn step_naive(state: &TorusState, automaton: &NoisyAutomaton, seed: u64, replica: u64, t: u64) -> TorusState {
    let p = automaton.noise;
    let probs = automaton.family.intrinsic_f64();
    let mut cum = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for q in &probs {
        acc += q;
        cum.push(acc);
    }
    let maps = automaton.family.maps();
    let mut next = state.clone();
    let mut coords = vec![0i64; state.dim];
    for row in 0..state.rows {
        let base = state.row_coords(row);
        for x0 in 0..state.side {
            coords.copy_from_slice(&base);
            coords[0] = x0 as i64;
            let site = state.site_index(row, x0);
            let u0 = unit_f64(hash_words(seed, &[replica, t, site, 0]));
            let value = if u0 < p {
                false
            } else {
                let k = if maps.len() == 1 {
                    0
                } else {
                    pick_map(&cum, unit_f64(hash_words(seed, &[replica, t, site, 1])))
                };
                maps[k].one_sets().iter().any(|s| {
                    s.members().iter().all(|m| {
                        let shifted: Vec<i64> = coords.iter().zip(m).map(|(c, d)| c + d).collect();
                        state.get(&shifted)
                    })
                })
            };
            next.set(&coords, value);
        }
    }
    next
}

/// Density trajectory of the maximal trajectory proxy: all-ones start,
/// independent replicas, densities averaged per slice.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SimReport {
    pub side: usize,
    pub steps: usize,
    pub replicas: usize,
    pub seed: u64,
    /// mean density per time slice, t = 0..=steps
    pub density: Vec<f64>,
    /// standard error of the per-replica densities, per slice
    pub stderr: Vec<f64>,
    pub final_mean: f64,
    pub final_stderr: f64,
}

pub fn run_max_trajectory(
    automaton: &NoisyAutomaton,
    side: usize,
    steps: usize,
    replicas: usize,
    seed: u64,
) -> Result<SimReport, SimError> {
    let dim = automaton.family.dimension();
    let radius = automaton.family.radius();
    if (side as i64) < 4 * radius.max(1) {
        return Err(SimError::TorusTooSmall { side, radius });
    }
    let per_replica: Vec<Vec<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|rep| {
            let mut state = TorusState::all_ones(side, dim);
            let mut series = Vec::with_capacity(steps + 1);
            series.push(state.density());
            for t in 0..steps as u64 {
                state = step(&state, automaton, seed, rep, t).expect("validated above");
                series.push(state.density());
            }
            series
        })
        .collect();
    let mut density = vec![0.0; steps + 1];
    for series in &per_replica {
        for (slot, v) in density.iter_mut().zip(series) {
            *slot += v;
        }
    }
    for slot in density.iter_mut() {
        *slot /= replicas as f64;
    }
    let stderr: Vec<f64> = (0..=steps)
        .map(|t| {
            if replicas < 2 {
                return 0.0;
            }
            let mean = density[t];
            let var = per_replica.iter().map(|s| (s[t] - mean).powi(2)).sum::<f64>()
                / (replicas - 1) as f64;
            (var / replicas as f64).sqrt()
        })
        .collect();
    let finals: Vec<f64> = per_replica.iter().map(|s| *s.last().unwrap()).collect();
    let final_mean = finals.iter().sum::<f64>() / replicas as f64;
    let var = if replicas > 1 {
        finals.iter().map(|x| (x - final_mean).powi(2)).sum::<f64>() / (replicas - 1) as f64
    } else {
        0.0
    };
    Ok(SimReport {
        side,
        steps,
        replicas,
        seed,
        density,
        stderr,
        final_mean,
        final_stderr: (var / replicas as f64).sqrt(),
    })
}

/// Runs the unperturbed (p = 0) dynamics from all-ones with the given
/// zero set until the zeros are gone; returns the number of steps, or None
/// if `max_steps` was not enough.
pub fn erosion_time(
    automaton: &NoisyAutomaton,
    side: usize,
    zeros: &[Vec<i64>],
    max_steps: usize,
    seed: u64,
) -> Result<Option<usize>, SimError> {
    let dim = automaton.family.dimension();
    let mut state = TorusState::all_ones(side, dim);
    for z in zeros {
        state.set(z, false);
    }
    let full = (side as u64).pow(dim as u32);
    if state.count_ones() == full {
        return Ok(Some(0));
    }
    for t in 0..max_steps as u64 {
        state = step(&state, automaton, seed, 0, t)?;
        if state.count_ones() == full {
            return Ok(Some(t as usize + 1));
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// Half-space interface runs on a plain window (no wrap). Only sites whose
// full dependency cone stays inside the window are kept, so the core after
// t steps is exact infinite-lattice data.

struct Window {
    half: i64,
    side: usize,
    bits: Vec<bool>,
}

impl Window {
    fn new(half: i64) -> Self {
        let side = (2 * half + 1) as usize;
        Window { half, side, bits: vec![false; side * side] }
    }

    fn idx(&self, x: i64, y: i64) -> usize {
        ((y + self.half) as usize) * self.side + (x + self.half) as usize
    }

    fn get(&self, x: i64, y: i64) -> bool {
        self.bits[self.idx(x, y)]
    }

    fn set(&mut self, x: i64, y: i64, v: bool) {
        let i = self.idx(x, y);
        self.bits[i] = v;
    }
}

/// Deterministic half-space run measuring the exact interface speed.
///
/// Starts from the half-space {form >= 0}, applies the map `steps` times,
/// and reads the displaced threshold off the core. Fails with
/// `WindowTooSmall` if the core stops being an exact half-space (the
/// window did not cover the interface).
pub fn empirical_edge_speed_p0(
    map: &MonotoneMap,
    form: &LinearForm,
    steps: usize,
) -> Result<Rat, SimError> {
    if map.dimension() != 2 || form.dim() != 2 {
        return Err(SimError::DimensionMismatch);
    }
    if form.coeffs().iter().all(|c| c.is_zero()) {
        return Err(SimError::ZeroForm);
    }
    let radius = map.radius().max(1);
    let t = steps as i64;

    // primitive integer form, for the lattice spacing of level lines
    let lcm_den = form
        .coeffs()
        .iter()
        .fold(num_bigint::BigInt::from(1), |acc, c| num_integer::lcm(acc, c.denom().clone()));
    let ints: Vec<num_bigint::BigInt> =
        form.coeffs().iter().map(|c| c.numer() * (&lcm_den / c.denom())).collect();
    let max_int: i64 = ints
        .iter()
        .map(|v| num_traits::ToPrimitive::to_i64(&v.abs()).unwrap_or(i64::MAX / 4))
        .max()
        .unwrap();

    let half = 3 * t * radius + max_int + 4;
    let mut w = Window::new(half);
    for y in -half..=half {
        for x in -half..=half {
            let v = form.eval_int(&[x, y]) >= Rat::from_integer(0.into());
            w.set(x, y, v);
        }
    }
    let core0 = half;
    let mut current = w;
    let mut valid = core0;
    for _ in 0..steps {
        valid -= radius;
        let mut next = Window::new(current.half);
        for y in -valid..=valid {
            for x in -valid..=valid {
                let v = map.one_sets().iter().any(|s| {
                    s.members().iter().all(|m| current.get(x + m[0], y + m[1]))
                });
                next.set(x, y, v);
            }
        }
        current = next;
    }

    let min_attained = |win: &Window, extent: i64| -> Option<Rat> {
        let mut best: Option<Rat> = None;
        for y in -extent..=extent {
            for x in -extent..=extent {
                if win.get(x, y) {
                    let v = form.eval_int(&[x, y]);
                    best = Some(match best {
                        Some(b) if b <= v => b,
                        _ => v,
                    });
                }
            }
        }
        best
    };
    let threshold = min_attained(&current, valid).ok_or(SimError::WindowTooSmall)?;
    // the core must be exactly the half-space at the measured threshold
    for y in -valid..=valid {
        for x in -valid..=valid {
            let expect = form.eval_int(&[x, y]) >= threshold;
            if current.get(x, y) != expect {
                return Err(SimError::WindowTooSmall);
            }
        }
    }
    // zero was attained at the start (the origin), so speed = -threshold / t
    Ok(-threshold / Rat::from_integer(t.into()))
}

/// Noisy interface drift estimate: mean zero-volume swept per step inside
/// the core band, with a standard error over replicas. A sanity tool, not
/// a certificate.
pub fn empirical_edge_speed_noisy(
    automaton: &NoisyAutomaton,
    form: &LinearForm,
    half: i64,
    steps: usize,
    replicas: usize,
    seed: u64,
) -> Result<(f64, f64), SimError> {
    if automaton.family.dimension() != 2 || form.dim() != 2 {
        return Err(SimError::DimensionMismatch);
    }
    let radius = automaton.family.radius().max(1);
    if half <= steps as i64 * radius + 2 {
        return Err(SimError::WindowTooSmall);
    }
    let probs = automaton.family.intrinsic_f64();
    let mut cum = Vec::new();
    let mut acc = 0.0;
    for q in &probs {
        acc += q;
        cum.push(acc);
    }
    let norm: f64 = {
        // per-unit-threshold site count of the band, estimated from the form
        let g: f64 = form.coeffs().iter().map(|c| to_f64(c) * to_f64(c)).sum::<f64>().sqrt();
        (2 * half + 1) as f64 / g
    };
    let speeds: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|rep| {
            let mut w = Window::new(half);
            for y in -half..=half {
                for x in -half..=half {
                    w.set(x, y, form.eval_int(&[x, y]) >= Rat::from_integer(0.into()));
                }
            }
            let mut valid = half;
            let zeros0 = count_zeros_band(&w, valid - steps as i64 * radius, form);
            for t in 0..steps as u64 {
                valid -= radius;
                let mut next = Window::new(w.half);
                for y in -valid..=valid {
                    for x in -valid..=valid {
                        let site = ((y + half) * (2 * half + 1) + (x + half)) as u64;
                        let u0 = unit_f64(hash_words(seed, &[rep, t, site, 0]));
                        let v = if u0 < automaton.noise {
                            false
                        } else {
                            let k = if cum.len() == 1 {
                                0
                            } else {
                                pick_map(&cum, unit_f64(hash_words(seed, &[rep, t, site, 1])))
                            };
                            automaton.family.map(k).one_sets().iter().any(|s| {
                                s.members().iter().all(|m| w.get(x + m[0], y + m[1]))
                            })
                        };
                        next.set(x, y, v);
                    }
                }
                w = next;
            }
            let zeros1 = count_zeros_band(&w, valid, form);
            // ones invading the negative side advance the interface
            -(zeros1 - zeros0) as f64 / norm / steps as f64
        })
        .collect();
    let mean = speeds.iter().sum::<f64>() / replicas as f64;
    let var = if replicas > 1 {
        speeds.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (replicas - 1) as f64
    } else {
        0.0
    };
    Ok((mean, (var / replicas as f64).sqrt()))
}

fn count_zeros_band(w: &Window, extent: i64, form: &LinearForm) -> i64 {
    let mut zeros = 0;
    for y in -extent..=extent {
        for x in -extent..=extent {
            if !w.get(x, y) && form.eval_int(&[x, y]) >= Rat::from_integer(0.into()) {
                zeros += 1;
            }
            if w.get(x, y) && form.eval_int(&[x, y]) < Rat::from_integer(0.into()) {
                zeros -= 1; // interface receded past the start line
            }
        }
    }
    zeros
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{builtin_model, coop_map, nec_map, triangular_maps, NoisyAutomaton};
    use crate::geometry::edge_speed;
    use crate::rat::{rat, rint};

    fn nec_auto(p: f64) -> NoisyAutomaton {
        NoisyAutomaton::new(builtin_model("toom-nec", None).unwrap(), p).unwrap()
    }

    #[test]
    fn p1_kills_everything_and_p0_identity_fixed() {
        let auto = nec_auto(1.0);
        let s = TorusState::all_ones(64, 2);
        let next = step(&s, &auto, 1, 0, 0).unwrap();
        assert_eq!(next.count_ones(), 0);

        let id_family = builtin_model("coop-id(1/2)", None).unwrap();
        let id_only = crate::automaton::RuleFamily::new(
            vec![id_family.map(1).clone()],
            vec![rint(1)],
        )
        .unwrap();
        let auto = NoisyAutomaton::new(id_only, 0.0).unwrap();
        let mut s = TorusState::all_ones(64, 2);
        s.set(&[3, 5], false);
        s.set(&[10, 2], false);
        let next = step(&s, &auto, 1, 0, 0).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn all_ones_invariant_at_p0() {
        let auto = nec_auto(0.0);
        let s = TorusState::all_ones(64, 2);
        let next = step(&s, &auto, 9, 0, 0).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn bulk_matches_naive_on_random_states() {
        for (name, r) in [("toom-nec", None), ("coop-id", Some(rat(1, 3))), ("cc-id", Some(rat(2, 5)))] {
            let family = builtin_model(name, r).unwrap();
            let auto = NoisyAutomaton::new(family, 0.07).unwrap();
            let mut s = TorusState::all_zeros(64, 2);
            for y in 0..64i64 {
                for x in 0..64i64 {
                    if hash_words(42, &[x as u64, y as u64]) % 3 == 0 {
                        s.set(&[x, y], true);
                    }
                }
            }
            let a = step_bulk(&s, &auto, 5, 1, 2);
            let b = step_naive(&s, &auto, 5, 1, 2);
            assert_eq!(a, b, "model {name}");
        }
    }

    #[test]
    fn deterministic_replay() {
        let auto = nec_auto(0.05);
        let a = run_max_trajectory(&auto, 64, 20, 3, 123).unwrap();
        let b = run_max_trajectory(&auto, 64, 20, 3, 123).unwrap();
        assert_eq!(a.density, b.density);
    }

    #[test]
    fn monotone_coupling_in_p() {
        let fam = builtin_model("toom-nec", None).unwrap();
        let lo = NoisyAutomaton::new(fam.clone(), 0.02).unwrap();
        let hi = NoisyAutomaton::new(fam, 0.10).unwrap();
        let mut s_lo = TorusState::all_ones(64, 2);
        let mut s_hi = TorusState::all_ones(64, 2);
        for t in 0..30u64 {
            s_lo = step(&s_lo, &lo, 7, 0, t).unwrap();
            s_hi = step(&s_hi, &hi, 7, 0, t).unwrap();
            assert!(s_hi.dominated_by(&s_lo), "dominance failed at t={t}");
        }
    }

    #[test]
    fn nec_erodes_finite_zero_sets() {
        let auto = nec_auto(0.0);
        let zeros: Vec<Vec<i64>> = vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![5, 7]];
        let t = erosion_time(&auto, 64, &zeros, 50, 0).unwrap();
        assert!(t.is_some());
    }

    #[test]
    fn pure_coop_erodes_finite_zero_sets() {
        let fam = builtin_model("coop-id(1)", None).unwrap();
        let auto = NoisyAutomaton::new(fam, 0.0).unwrap();
        let zeros: Vec<Vec<i64>> = vec![vec![2, 2], vec![3, 2], vec![2, 3], vec![10, 11]];
        let t = erosion_time(&auto, 64, &zeros, 100, 0).unwrap();
        assert!(t.is_some());
    }

    #[test]
    fn identity_interface_never_moves() {
        let id = builtin_model("coop-id(0)", None).unwrap().map(0).clone();
        for coeffs in [[1i64, 1], [2, -1], [0, 1]] {
            let ell = LinearForm::new(vec![rint(coeffs[0]), rint(coeffs[1])]).unwrap();
            assert_eq!(empirical_edge_speed_p0(&id, &ell, 3).unwrap(), rint(0));
        }
    }

    #[test]
    fn noisy_speed_estimate_tracks_the_deterministic_speed() {
        let fam = builtin_model("coop-id(1)", None).unwrap();
        let auto = NoisyAutomaton::new(fam, 0.001).unwrap();
        let ell = LinearForm::new(vec![rint(1), rint(1)]).unwrap();
        let (speed, stderr) = empirical_edge_speed_noisy(&auto, &ell, 40, 10, 4, 7).unwrap();
        assert!((speed - 1.0).abs() < 0.2, "speed = {speed} +- {stderr}");
        assert!(matches!(
            empirical_edge_speed_noisy(&auto, &ell, 8, 10, 2, 7),
            Err(SimError::WindowTooSmall)
        ));
    }

    #[test]
    fn one_step_half_space_law() {
        // a single step displaces the interface by exactly the edge speed
        let coop = coop_map();
        let ell = LinearForm::new(vec![rint(1), rint(1)]).unwrap();
        assert_eq!(empirical_edge_speed_p0(&coop, &ell, 1).unwrap(), rint(1));
    }

    #[test]
    fn halfspace_speeds_match_exact_edge_speeds() {
        let coop = coop_map();
        let ell = LinearForm::new(vec![rint(1), rint(1)]).unwrap();
        assert_eq!(empirical_edge_speed_p0(&coop, &ell, 4).unwrap(), rint(1));

        let tri = triangular_maps();
        let forms = [
            LinearForm::new(vec![rint(-1), rint(-1)]).unwrap(),
            LinearForm::new(vec![rint(2), rint(-1)]).unwrap(),
            LinearForm::new(vec![rint(-1), rint(2)]).unwrap(),
        ];
        for (k, map) in tri.iter().enumerate() {
            for (s, f) in forms.iter().enumerate() {
                let sim = empirical_edge_speed_p0(map, f, 3).unwrap();
                assert_eq!(sim, if s == k { rint(1) } else { rint(0) }, "s={s} k={k}");
            }
        }

        // a fractional-speed case
        let nec = nec_map();
        let ell = LinearForm::new(vec![rat(1, 2), rat(1, 3)]).unwrap();
        let expect = edge_speed(&nec, &ell);
        assert_eq!(empirical_edge_speed_p0(&nec, &ell, 6).unwrap(), expect);
    }
}
