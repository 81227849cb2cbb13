use num_rational::BigRational;
use num_traits::{One, Signed};

use super::poly::{Evaluator, Polynomial};
use super::ParametricError;

/// Magnitude below which a denominator counts as vanishing at a point.
pub const DENOMINATOR_TOLERANCE: f64 = 1e-14;

/// Quotient of polynomials. The denominator is kept monic under graded-lex
/// order (which makes its leading coefficient positive); constant
/// denominators are folded into the numerator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalFunction {
    num: Polynomial,
    den: Polynomial,
}

impl RationalFunction {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self, ParametricError> {
        if den.is_zero() {
            return Err(ParametricError::DivisionByZeroPolynomial);
        }
        Ok(Self::normalized(num, den))
    }

    pub fn from_polynomial(p: Polynomial) -> Self {
        let n = p.nvars();
        RationalFunction {
            num: p,
            den: Polynomial::one(n),
        }
    }

    pub fn constant(nvars: usize, c: BigRational) -> Self {
        Self::from_polynomial(Polynomial::constant(nvars, c))
    }

    fn normalized(num: Polynomial, den: Polynomial) -> Self {
        let nvars = num.nvars();
        if num.is_zero() {
            return Self::from_polynomial(num);
        }
        if let Some(c) = num.ratio_to(&den) {
            return Self::constant(nvars, c);
        }
        let lead = den
            .leading_coefficient()
            .expect("nonzero denominator")
            .clone();
        if let Some(c) = den.as_constant() {
            return Self::from_polynomial(num.scale(&(BigRational::one() / c)));
        }
        if lead.is_one() {
            return RationalFunction { num, den };
        }
        let inv = BigRational::one() / lead;
        RationalFunction {
            num: num.scale(&inv),
            den: den.scale(&inv),
        }
    }

    pub fn numerator(&self) -> &Polynomial {
        &self.num
    }

    pub fn denominator(&self) -> &Polynomial {
        &self.den
    }

    pub fn nvars(&self) -> usize {
        self.num.nvars()
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.as_constant().is_some()
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        self.is_polynomial()
            .then(|| self.num.as_constant())
            .flatten()
    }

    /// Total stored terms, the measure capped by the synthesis options.
    pub fn size(&self) -> usize {
        self.num.term_count() + self.den.term_count()
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.den == other.den {
            return Self::normalized(&self.num + &other.num, self.den.clone());
        }
        let num = &(&self.num * &other.den) + &(&other.num * &self.den);
        Self::normalized(num, &self.den * &other.den)
    }

    pub fn neg(&self) -> Self {
        RationalFunction {
            num: -&self.num,
            den: self.den.clone(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::from_polynomial(Polynomial::zero(self.nvars()));
        }
        Self::normalized(&self.num * &other.num, &self.den * &other.den)
    }

    pub fn div(&self, other: &Self) -> Result<Self, ParametricError> {
        if other.is_zero() {
            return Err(ParametricError::DivisionByZeroPolynomial);
        }
        Ok(Self::normalized(
            &self.num * &other.den,
            &self.den * &other.num,
        ))
    }

    /// `1 − self`.
    pub fn one_minus(&self) -> Self {
        let one = Self::constant(self.nvars(), BigRational::one());
        one.sub(self)
    }

    /// Quotient rule.
    pub fn derivative(&self, i: usize) -> Self {
        let dn = self.num.derivative(i);
        let dd = self.den.derivative(i);
        if dd.is_zero() {
            return Self::normalized(dn, self.den.clone());
        }
        let num = &(&dn * &self.den) - &(&self.num * &dd);
        Self::normalized(num, &self.den * &self.den)
    }

    pub fn instantiate(&self, x: &[f64]) -> Result<f64, ParametricError> {
        if x.len() < self.nvars() {
            return Err(ParametricError::MissingVariable(x.len()));
        }
        self.evaluator().eval(x)
    }

    pub fn evaluator(&self) -> RationalEvaluator {
        RationalEvaluator {
            num: self.num.evaluator(),
            den: (!self.is_polynomial()).then(|| self.den.evaluator()),
        }
    }

    pub fn to_text(&self, names: &[String]) -> String {
        if self.is_polynomial() {
            return self.num.to_text(names);
        }
        format!(
            "({}) / ({})",
            self.num.to_text(names),
            self.den.to_text(names)
        )
    }

    /// Sign of the leading denominator coefficient (always positive).
    pub fn denominator_sign_positive(&self) -> bool {
        self.den
            .leading_coefficient()
            .is_some_and(|c| c.is_positive())
    }
}

#[derive(Debug, Clone)]
pub struct RationalEvaluator {
    num: Evaluator,
    den: Option<Evaluator>,
}

impl RationalEvaluator {
    pub fn eval(&self, x: &[f64]) -> Result<f64, ParametricError> {
        let n = self.num.eval(x);
        match &self.den {
            None => Ok(n),
            Some(d) => {
                let d = d.eval(x);
                if d.abs() < DENOMINATOR_TOLERANCE || !d.is_finite() {
                    Err(ParametricError::DenominatorNearZero)
                } else {
                    Ok(n / d)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn forced_cancellation() {
        // v / (1 - (1 - v))
        let v = Polynomial::var(1, 0);
        let one = Polynomial::one(1);
        let den = &one - &(&one - &v);
        let f = RationalFunction::new(v, den).unwrap();
        assert_eq!(f.as_constant(), Some(q(1, 1)));
    }

    #[test]
    fn normalization_makes_denominator_monic() {
        let x = Polynomial::var(2, 0);
        let y = Polynomial::var(2, 1);
        let den = (&x - &y).scale(&q(-3, 2));
        let f = RationalFunction::new(y.clone(), den).unwrap();
        assert!(f.denominator().leading_coefficient().unwrap().is_one());
        assert!(f.denominator_sign_positive());
        let val = f.evaluator().eval(&[0.5, 0.25]).unwrap();
        assert!((val - 0.25 / (-1.5 * 0.25)).abs() < 1e-15);
        assert_eq!(
            RationalFunction::new(x, Polynomial::zero(2)),
            Err(ParametricError::DivisionByZeroPolynomial)
        );
    }

    #[test]
    fn quotient_rule() {
        // f = x / (1 + x), f' = 1 / (1 + x)^2
        let x = Polynomial::var(1, 0);
        let f = RationalFunction::new(x.clone(), &Polynomial::one(1) + &x).unwrap();
        let df = f.derivative(0).evaluator();
        for v in [0.0, 0.5, 2.0] {
            assert!((df.eval(&[v]).unwrap() - 1.0 / (1.0 + v).powi(2)).abs() < 1e-14);
        }
    }

    #[test]
    fn vanishing_denominator_reported() {
        let x = Polynomial::var(1, 0);
        let f = RationalFunction::new(Polynomial::one(1), x).unwrap();
        assert_eq!(
            f.evaluator().eval(&[0.0]),
            Err(ParametricError::DenominatorNearZero)
        );
    }
}
