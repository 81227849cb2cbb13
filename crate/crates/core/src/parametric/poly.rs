use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exponent vector. Ordered graded-lexicographically: total degree first,
/// then the exponent of the earliest variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse multivariate polynomial with exact rational coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, BigRational>,
}

pub fn rational(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite probability")
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: BigRational) -> Self {
        let mut p = Self::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(Monomial::one(nvars), c);
        }
        p
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, BigRational::one())
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut p = Self::zero(nvars);
        p.terms.insert(Monomial::var(nvars, i), BigRational::one());
        p
    }

    /// Builds from `(exponents, coefficient)` pairs, summing duplicates.
    pub fn from_terms(
        nvars: usize,
        terms: impl IntoIterator<Item = (Vec<u32>, BigRational)>,
    ) -> Self {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            assert_eq!(e.len(), nvars, "exponent vector length");
            p.add_term(Monomial(e), c);
        }
        p
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    /// The constant value if the polynomial has no variable terms.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                (m.degree() == 0).then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Coefficient of the largest monomial under graded-lex order.
    pub fn leading_coefficient(&self) -> Option<&BigRational> {
        self.terms.values().next_back()
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero(self.nvars);
        }
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect(),
        }
    }

    /// Multiplies by the single variable `i`.
    pub fn mul_var(&self, i: usize) -> Self {
        Polynomial {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(m, v)| {
                    let mut e = m.0.clone();
                    e[i] += 1;
                    (Monomial(e), v.clone())
                })
                .collect(),
        }
    }

    /// `self += c · other`.
    pub fn add_scaled(&mut self, other: &Polynomial, c: &BigRational) {
        if c.is_zero() {
            return;
        }
        for (m, v) in &other.terms {
            self.add_term(m.clone(), v * c);
        }
    }

    /// `self += other · x_i`.
    pub fn add_mul_var(&mut self, other: &Polynomial, i: usize) {
        for (m, v) in &other.terms {
            let mut e = m.0.clone();
            e[i] += 1;
            self.add_term(Monomial(e), v.clone());
        }
    }

    /// True if `self = c · other` for some rational `c ≠ 0`; returns `c`.
    pub fn ratio_to(&self, other: &Polynomial) -> Option<BigRational> {
        if self.terms.len() != other.terms.len() || other.is_zero() {
            return None;
        }
        let mut ratio: Option<BigRational> = None;
        for ((ma, ca), (mb, cb)) in self.terms.iter().zip(&other.terms) {
            if ma != mb {
                return None;
            }
            let r = ca / cb;
            match &ratio {
                None => ratio = Some(r),
                Some(q) if *q == r => {}
                Some(_) => return None,
            }
        }
        ratio
    }

    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (m, c) in &self.terms {
            let k = m.0[i];
            if k == 0 {
                continue;
            }
            let mut e = m.0.clone();
            e[i] -= 1;
            out.add_term(Monomial(e), c * BigRational::from_integer(BigInt::from(k)));
        }
        out
    }

    /// Substitutes `x_i := value`, keeping the variable list.
    pub fn substitute(&self, i: usize, value: &BigRational) -> Self {
        let mut out = Self::zero(self.nvars);
        for (m, c) in &self.terms {
            let mut e = m.0.clone();
            let k = std::mem::replace(&mut e[i], 0);
            let factor = num_traits::pow(value.clone(), k as usize);
            out.add_term(Monomial(e), c * factor);
        }
        out
    }

    /// Value at `x` (indexed by variable); fails if `x` is too short.
    pub fn instantiate(&self, x: &[f64]) -> Result<f64, super::ParametricError> {
        if x.len() < self.nvars {
            return Err(super::ParametricError::MissingVariable(x.len()));
        }
        Ok(self.evaluator().eval(x))
    }

    pub fn evaluator(&self) -> Evaluator {
        Evaluator::new(self)
    }

    /// Canonical text: terms in descending graded-lex order.
    pub fn to_text(&self, names: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let is_const = m.degree() == 0;
            let integral = c.is_integer();
            if k == 0 {
                if is_const {
                    write!(out, "{c}").unwrap();
                } else if c.is_one() {
                } else if *c == -BigRational::one() {
                    out.push('-');
                } else if integral {
                    write!(out, "{c}*").unwrap();
                } else {
                    write!(out, "({c})*").unwrap();
                }
            } else {
                out.push_str(if c.is_negative() { " - " } else { " + " });
                let a = c.abs();
                if is_const {
                    write!(out, "{a}").unwrap();
                } else if a.is_one() {
                } else if integral {
                    write!(out, "{a}*").unwrap();
                } else {
                    write!(out, "({a})*").unwrap();
                }
            }
            let mut first = true;
            for (j, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if !first {
                    out.push('*');
                }
                first = false;
                out.push_str(&names[j]);
                if e > 1 {
                    write!(out, "^{e}").unwrap();
                }
            }
        }
        out
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    /// Children by descending exponent of `var`.
    Branch {
        var: usize,
        children: Vec<(u32, Node)>,
    },
}

/// Floating-point Horner scheme compiled from a polynomial, nested by
/// variable order.
#[derive(Debug, Clone)]
pub struct Evaluator {
    nvars: usize,
    root: Node,
}

impl Evaluator {
    fn new(p: &Polynomial) -> Self {
        let mut terms: Vec<(&[u32], f64)> = p
            .terms
            .iter()
            .map(|(m, c)| (m.0.as_slice(), c.to_f64().unwrap_or(f64::NAN)))
            .collect();
        terms.sort_by(|a, b| b.0.cmp(a.0));
        Evaluator {
            nvars: p.nvars,
            root: build(&terms, 0, p.nvars),
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        eval_node(&self.root, x)
    }
}

fn build(terms: &[(&[u32], f64)], var: usize, nvars: usize) -> Node {
    if terms.is_empty() {
        return Node::Leaf(0.0);
    }
    if var == nvars {
        return Node::Leaf(terms.iter().map(|t| t.1).sum());
    }
    if terms.iter().all(|t| t.0[var] == 0) {
        return build(terms, var + 1, nvars);
    }
    let mut children = Vec::new();
    let mut i = 0;
    while i < terms.len() {
        let e = terms[i].0[var];
        let j = i + terms[i..].iter().take_while(|t| t.0[var] == e).count();
        children.push((e, build(&terms[i..j], var + 1, nvars)));
        i = j;
    }
    Node::Branch { var, children }
}

fn eval_node(node: &Node, x: &[f64]) -> f64 {
    match node {
        Node::Leaf(c) => *c,
        Node::Branch { var, children } => {
            let xv = x[*var];
            let mut acc = 0.0;
            let mut prev = children[0].0;
            for (e, child) in children {
                acc = acc * xv.powi((prev - e) as i32) + eval_node(child, x);
                prev = *e;
            }
            acc * xv.powi(prev as i32)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn names() -> Vec<String> {
        ["a", "b", "c"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn canonical_text() {
        let p = Polynomial::from_terms(
            3,
            [
                (vec![0, 1, 0], q(3, 1)),
                (vec![2, 0, 1], q(-1, 5)),
                (vec![0, 0, 0], q(-7, 2)),
            ],
        );
        assert_eq!(p.to_text(&names()), "(-1/5)*a^2*c + 3*b - 7/2");
        let p = Polynomial::from_terms(3, [(vec![1, 0, 0], q(-1, 1)), (vec![0, 1, 0], q(1, 2))]);
        assert_eq!(p.to_text(&names()), "-a + (1/2)*b");
        assert_eq!(Polynomial::zero(3).to_text(&names()), "0");
    }

    #[test]
    fn graded_lex_order() {
        let a = Monomial(vec![1, 0, 0]);
        let b2 = Monomial(vec![0, 2, 0]);
        let ab = Monomial(vec![1, 1, 0]);
        assert!(a < b2 && b2 < ab);
    }

    #[test]
    fn derivative_of_closed_form() {
        // 1 - (1 - q)^5
        let one = Polynomial::one(1);
        let base = &one - &Polynomial::var(1, 0);
        let mut pow = Polynomial::one(1);
        for _ in 0..5 {
            pow = &pow * &base;
        }
        let f = &one - &pow;
        let df = f.derivative(0);
        let mut expect = Polynomial::one(1);
        for _ in 0..4 {
            expect = &expect * &base;
        }
        assert_eq!(df, expect.scale(&q(5, 1)));
        assert!(Polynomial::constant(2, q(3, 4)).derivative(1).is_zero());
    }

    #[test]
    fn horner_matches_term_sum() {
        let p = Polynomial::from_terms(
            3,
            [
                (vec![3, 1, 0], q(2, 3)),
                (vec![0, 2, 2], q(-5, 7)),
                (vec![1, 0, 4], q(1, 9)),
                (vec![0, 0, 0], q(4, 1)),
            ],
        );
        let x = [0.3f64, -1.7, 0.9];
        let direct: f64 = p
            .terms()
            .map(|(m, c)| {
                c.to_f64().unwrap()
                    * m.exponents()
                        .iter()
                        .zip(&x)
                        .map(|(&e, v)| v.powi(e as i32))
                        .product::<f64>()
            })
            .sum();
        assert!((p.evaluator().eval(&x) - direct).abs() < 1e-14);
    }

    #[test]
    fn substitute_and_ratio() {
        let p = Polynomial::from_terms(2, [(vec![2, 1], q(1, 1)), (vec![0, 1], q(3, 1))]);
        let s = p.substitute(0, &q(1, 2));
        assert_eq!(s, Polynomial::var(2, 1).scale(&q(13, 4)));
        assert_eq!(p.scale(&q(-2, 3)).ratio_to(&p), Some(q(-2, 3)));
        assert_eq!(p.ratio_to(&s), None);
    }
}
