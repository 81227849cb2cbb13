use crate::model::Dtmc;
use crate::parametric::{Evaluator, RationalFunction, DENOMINATOR_TOLERANCE};
use crate::property::Checker;
use crate::threat::Polytope;

use super::optimizer::Objective;

/// Satisfaction probability recomputed on the explicit chain at every
/// point, differentiated by central differences.
pub(crate) struct Direct<'a> {
    pub model: &'a Dtmc,
    pub space: &'a Polytope,
    pub checker: &'a Checker,
    pub h: f64,
    /// Variables whose row cannot influence the result get a zero partial.
    pub relevant: Vec<bool>,
}

impl<'a> Direct<'a> {
    pub fn new(model: &'a Dtmc, space: &'a Polytope, checker: &'a Checker, h: f64) -> Self {
        let decided = checker.decided();
        let relevant = space.vars().iter().map(|v| !decided[v.from]).collect();
        Direct {
            model,
            space,
            checker,
            h,
            relevant,
        }
    }
}

impl Objective for Direct<'_> {
    fn value(&self, v: &[f64]) -> Option<f64> {
        let p = self
            .checker
            .at_init(&self.space.rows_at(self.model, v))
            .ok()?;
        p.is_finite().then_some(p)
    }

    fn gradient(&self, v: &[f64]) -> Option<Vec<f64>> {
        let mut probe = v.to_vec();
        let mut g = vec![0.0; v.len()];
        for i in (0..v.len()).filter(|&i| self.relevant[i]) {
            probe[i] = v[i] + self.h;
            let up = self.value(&probe)?;
            probe[i] = v[i] - self.h;
            let down = self.value(&probe)?;
            probe[i] = v[i];
            g[i] = (up - down) / (2.0 * self.h);
        }
        Some(g)
    }
}

/// A synthesized rational function, evaluated numerically. Partials use the
/// quotient rule on the exact partials of numerator and denominator.
pub(crate) struct Symbolic {
    num: Evaluator,
    den: Evaluator,
    dnum: Vec<Option<Evaluator>>,
    dden: Vec<Option<Evaluator>>,
}

impl Symbolic {
    pub fn new(f: &RationalFunction) -> Self {
        let nv = f.nvars();
        let partial = |p: &crate::parametric::Polynomial, i: usize| {
            let d = p.derivative(i);
            (!d.is_zero()).then(|| d.evaluator())
        };
        Symbolic {
            num: f.numerator().evaluator(),
            den: f.denominator().evaluator(),
            dnum: (0..nv).map(|i| partial(f.numerator(), i)).collect(),
            dden: (0..nv).map(|i| partial(f.denominator(), i)).collect(),
        }
    }

    fn parts(&self, v: &[f64]) -> Option<(f64, f64)> {
        let d = self.den.eval(v);
        if d.abs() < DENOMINATOR_TOLERANCE || !d.is_finite() {
            return None;
        }
        Some((self.num.eval(v), d))
    }
}

impl Objective for Symbolic {
    fn value(&self, v: &[f64]) -> Option<f64> {
        let (n, d) = self.parts(v)?;
        let f = n / d;
        f.is_finite().then_some(f)
    }

    fn gradient(&self, v: &[f64]) -> Option<Vec<f64>> {
        let (n, d) = self.parts(v)?;
        let at = |e: &Option<Evaluator>| e.as_ref().map_or(0.0, |e| e.eval(v));
        Some(
            self.dnum
                .iter()
                .zip(&self.dden)
                .map(|(dn, dd)| (at(dn) * d - n * at(dd)) / (d * d))
                .collect(),
        )
    }
}
