//! Load-dependent resource functions.
//!
//! A function maps the vector of input data rates of a component to a
//! scalar (CPU, memory, or one output rate). Every function is separable:
//! `f(x) = constant + sum_k g_k(x_k)` with `g_k(0) = 0`. A term is either a
//! linear coefficient, which keeps the whole function affine and therefore
//! exportable to the MILP, or a non-decreasing piecewise-linear curve
//! (steps allowed) that only the heuristic and the oracle understand.

use serde::{Deserialize, Serialize};

use super::TOL;

/// One segment of a piecewise term, valid for inputs up to and including
/// `upto` (`None` means unbounded). Value on the segment is
/// `intercept + slope * x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upto: Option<f64>,
    pub intercept: f64,
    pub slope: f64,
}

impl Piece {
    fn value(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    fn end(&self) -> f64 {
        self.upto.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseTerm {
    pub pieces: Vec<Piece>,
}

impl PiecewiseTerm {
    /// Step of height `high - low` right after `at`: `low` for `x <= at`,
    /// `high` otherwise.
    pub fn step(at: f64, low: f64, high: f64) -> Self {
        PiecewiseTerm {
            pieces: vec![
                Piece { upto: Some(at), intercept: low, slope: 0.0 },
                Piece { upto: None, intercept: high, slope: 0.0 },
            ],
        }
    }

    fn piece_for(&self, x: f64) -> &Piece {
        self.pieces
            .iter()
            .find(|p| x <= p.end())
            .unwrap_or_else(|| self.pieces.last().expect("piecewise term without pieces"))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.piece_for(x).value(x)
    }

    /// Largest `x >= from` with `eval(x) <= budget`, or `None` when already
    /// `eval(from) > budget`.
    fn invert(&self, from: f64, budget: f64) -> Option<f64> {
        if self.eval(from) > budget + TOL {
            return None;
        }
        let mut best = from;
        let mut lo = f64::NEG_INFINITY;
        let last = self.pieces.len() - 1;
        for (idx, piece) in self.pieces.iter().enumerate() {
            let hi = if idx == last { f64::INFINITY } else { piece.end() };
            if hi < from {
                lo = hi;
                continue;
            }
            let start = lo.max(from);
            if piece.value(start) > budget + TOL {
                return Some(best);
            }
            if hi.is_infinite() {
                if piece.slope <= 0.0 {
                    return Some(f64::INFINITY);
                }
                return Some(((budget - piece.intercept) / piece.slope).max(start));
            }
            if piece.value(hi) <= budget + TOL {
                best = hi;
                lo = hi;
                continue;
            }
            return Some(((budget - piece.intercept) / piece.slope).clamp(start, hi));
        }
        Some(best)
    }

    fn check(&self) -> Result<(), String> {
        if self.pieces.is_empty() {
            return Err("piecewise term has no pieces".into());
        }
        let mut prev_end = f64::NEG_INFINITY;
        let mut prev_value: Option<f64> = None;
        for (idx, p) in self.pieces.iter().enumerate() {
            if !p.intercept.is_finite() || !p.slope.is_finite() {
                return Err(format!("piece {idx} has a non-finite parameter"));
            }
            if p.slope < 0.0 {
                return Err(format!("piece {idx} has a negative slope"));
            }
            let end = p.end();
            if end.is_nan() || end <= prev_end {
                return Err(format!("piece {idx} does not extend past the previous breakpoint"));
            }
            if let Some(v) = prev_value {
                if p.value(prev_end) < v - TOL {
                    return Err(format!("term decreases at breakpoint {prev_end}"));
                }
            }
            if end.is_finite() {
                prev_value = Some(p.value(end));
            }
            prev_end = end;
        }
        if self.eval(0.0).abs() > TOL {
            return Err("piecewise term must vanish at zero input (put the offset in `constant`)".into());
        }
        Ok(())
    }
}

/// Contribution of a single input to a [`ResourceFunction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputTerm {
    Linear(f64),
    Piecewise(PiecewiseTerm),
}

impl InputTerm {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InputTerm::Linear(c) => c * x,
            InputTerm::Piecewise(p) => p.eval(x),
        }
    }

    fn invert(&self, from: f64, budget: f64) -> Option<f64> {
        match self {
            InputTerm::Linear(c) => {
                if c * from > budget + TOL {
                    None
                } else if *c <= 0.0 {
                    Some(f64::INFINITY)
                } else {
                    Some((budget / c).max(from))
                }
            }
            InputTerm::Piecewise(p) => p.invert(from, budget),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceFunction {
    pub constant: f64,
    #[serde(rename = "coefficients", default)]
    pub terms: Vec<InputTerm>,
}

impl ResourceFunction {
    pub fn affine(constant: f64, coefficients: &[f64]) -> Self {
        ResourceFunction { constant, terms: coefficients.iter().map(|&c| InputTerm::Linear(c)).collect() }
    }

    pub fn zero(inputs: usize) -> Self {
        Self::affine(0.0, &vec![0.0; inputs])
    }

    pub fn constant(value: f64, inputs: usize) -> Self {
        Self::affine(value, &vec![0.0; inputs])
    }

    pub fn inputs(&self) -> usize {
        self.terms.len()
    }

    pub fn eval(&self, rates: &[f64]) -> f64 {
        debug_assert_eq!(rates.len(), self.terms.len());
        self.constant + self.terms.iter().zip(rates).map(|(t, &x)| t.eval(x)).sum::<f64>()
    }

    pub fn is_affine(&self) -> bool {
        self.terms.iter().all(|t| matches!(t, InputTerm::Linear(_)))
    }

    /// Per-input coefficients if the function is affine.
    pub fn coefficients(&self) -> Option<Vec<f64>> {
        self.terms
            .iter()
            .map(|t| match t {
                InputTerm::Linear(c) => Some(*c),
                InputTerm::Piecewise(_) => None,
            })
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.terms.iter().all(|t| matches!(t, InputTerm::Linear(c) if *c == 0.0))
    }

    /// Largest additional rate `delta >= 0` on input `input` such that
    /// `f(rates + delta * e_input) <= budget`. Returns 0 when the current
    /// value already exceeds the budget and infinity when no finite limit
    /// exists.
    pub fn max_increase(&self, rates: &[f64], input: usize, budget: f64) -> f64 {
        let current = self.eval(rates);
        if current > budget + TOL {
            return 0.0;
        }
        let term = &self.terms[input];
        let x0 = rates[input];
        let rest = current - term.eval(x0);
        match term.invert(x0, budget - rest) {
            Some(x) if x.is_infinite() => f64::INFINITY,
            Some(x) => (x - x0).max(0.0),
            None => 0.0,
        }
    }

    pub fn check(&self, inputs: usize) -> Result<(), String> {
        if self.terms.len() != inputs {
            return Err(format!("expected {} input terms, found {}", inputs, self.terms.len()));
        }
        if !self.constant.is_finite() || self.constant < 0.0 {
            return Err("constant must be finite and non-negative".into());
        }
        for (k, t) in self.terms.iter().enumerate() {
            match t {
                InputTerm::Linear(c) if !c.is_finite() || *c < 0.0 => {
                    return Err(format!("coefficient {k} must be finite and non-negative"));
                }
                InputTerm::Linear(_) => {}
                InputTerm::Piecewise(p) => p.check().map_err(|e| format!("input {k}: {e}"))?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_evaluation() {
        let p = ResourceFunction::affine(1.0, &[2.0]);
        assert_eq!(p.eval(&[4.0]), 9.0);
        assert_eq!(p.eval(&[0.0]), p.constant);
    }

    #[test]
    fn invert_affine_budget() {
        let p = ResourceFunction::affine(0.0, &[2.0]);
        assert_eq!(p.max_increase(&[0.0], 0, 10.0), 5.0);
        assert_eq!(p.max_increase(&[1.0], 0, 10.0), 4.0);
        assert_eq!(p.max_increase(&[6.0], 0, 10.0), 0.0);
        let flat = ResourceFunction::constant(3.0, 1);
        assert!(flat.max_increase(&[0.0], 0, 10.0).is_infinite());
        assert_eq!(flat.max_increase(&[0.0], 0, 2.0), 0.0);
    }

    #[test]
    fn step_function_inversion() {
        // 1 up to k = 2, then 2
        let f =
            ResourceFunction { constant: 1.0, terms: vec![InputTerm::Piecewise(PiecewiseTerm::step(2.0, 0.0, 1.0))] };
        assert!(f.check(1).is_ok());
        assert_eq!(f.eval(&[2.0]), 1.0);
        assert_eq!(f.eval(&[2.5]), 2.0);
        assert_eq!(f.max_increase(&[0.0], 0, 1.0), 2.0);
        assert_eq!(f.max_increase(&[1.0], 0, 1.0), 1.0);
        assert!(f.max_increase(&[3.0], 0, 2.0).is_infinite());
        assert_eq!(f.max_increase(&[0.0], 0, 0.5), 0.0);
    }

    #[test]
    fn piecewise_ramp_inversion() {
        let f = ResourceFunction {
            constant: 0.0,
            terms: vec![InputTerm::Piecewise(PiecewiseTerm {
                pieces: vec![
                    Piece { upto: Some(4.0), intercept: 0.0, slope: 1.0 },
                    Piece { upto: None, intercept: -4.0, slope: 2.0 },
                ],
            })],
        };
        assert!(f.check(1).is_ok());
        assert_eq!(f.max_increase(&[0.0], 0, 3.0), 3.0);
        assert_eq!(f.max_increase(&[0.0], 0, 8.0), 6.0);
    }

    #[test]
    fn rejects_decreasing_and_offset_terms() {
        let dec =
            ResourceFunction { constant: 0.0, terms: vec![InputTerm::Piecewise(PiecewiseTerm::step(1.0, 0.0, -1.0))] };
        assert!(dec.check(1).is_err());
        let offset =
            ResourceFunction { constant: 0.0, terms: vec![InputTerm::Piecewise(PiecewiseTerm::step(1.0, 1.0, 2.0))] };
        assert!(offset.check(1).is_err());
        assert!(ResourceFunction::affine(-1.0, &[1.0]).check(1).is_err());
        assert!(ResourceFunction::affine(0.0, &[1.0]).check(2).is_err());
    }

    #[test]
    fn json_shape() {
        let f: ResourceFunction =
            serde_json::from_str(r#"{"constant": 1, "coefficients": [2, {"pieces": [{"upto": 3, "intercept": 0, "slope": 0}, {"intercept": 1, "slope": 0}]}]}"#)
                .unwrap();
        assert!(!f.is_affine());
        assert_eq!(f.eval(&[1.0, 4.0]), 4.0);
    }
}
