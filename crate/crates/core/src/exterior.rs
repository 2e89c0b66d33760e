//! Coordinate exterior algebra with the metric Hodge star.
//!
//! Forms are stored as sparse maps from strictly increasing 1-based
//! multi-indices to coefficients. The Hodge star is evaluated by direct
//! summation over permutations, which restricts it to small charts.
//! This module also carries the covariant formula for v₀ that serves as
//! an independent route to the one in [`crate::control`].

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::control::ControlProblem;
use crate::error::{Error, Result};
use crate::manifold::{expect_dim, ChartPoint, MetricField, ScalarField, TangentVector};

/// Largest chart dimension accepted by [`hodge`].
pub const MAX_HODGE_DIM: usize = 8;

/// Sign of the permutation sorting `seq`, or 0 if an entry repeats.
fn sort_sign(seq: &[usize]) -> i32 {
    let mut inversions = 0usize;
    for a in 0..seq.len() {
        for b in (a + 1)..seq.len() {
            if seq[a] == seq[b] {
                return 0;
            }
            if seq[a] > seq[b] {
                inversions += 1;
            }
        }
    }
    if inversions.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Ricci symbol ε_{i₁…i_r}: the sign of (i₁,…,i_r) as a permutation of
/// {1,…,r}, and 0 otherwise.
pub fn ricci_epsilon(indices: &[usize]) -> i32 {
    let r = indices.len();
    if indices.iter().any(|&i| i == 0 || i > r) {
        return 0;
    }
    sort_sign(indices)
}

/// Generalized Kronecker symbol δ^{upper}_{lower}: nonzero only when the
/// lower indices are distinct and the upper ones rearrange them, in which
/// case it is the sign of that rearrangement.
pub fn gen_kronecker(upper: &[usize], lower: &[usize]) -> i32 {
    if upper.len() != lower.len() {
        return 0;
    }
    let r = lower.len();
    // perm[m] = position in `lower` of upper[m]
    let mut perm = Vec::with_capacity(r);
    for (a, &l) in lower.iter().enumerate() {
        if lower[..a].contains(&l) {
            return 0;
        }
    }
    for &u in upper {
        match lower.iter().position(|&l| l == u) {
            Some(pos) if !perm.contains(&pos) => perm.push(pos),
            _ => return 0,
        }
    }
    // parity from the cycle decomposition
    let mut seen = vec![false; r];
    let mut transpositions = 0usize;
    for start in 0..r {
        if seen[start] {
            continue;
        }
        let mut len = 0usize;
        let mut at = start;
        while !seen[at] {
            seen[at] = true;
            at = perm[at];
            len += 1;
        }
        transpositions += len - 1;
    }
    if transpositions.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// All permutations of 0..n with their signs.
fn permutations(n: usize) -> Vec<(Vec<usize>, i32)> {
    fn go(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<(Vec<usize>, i32)>) {
        let n = used.len();
        if prefix.len() == n {
            out.push((prefix.clone(), sort_sign(prefix)));
            return;
        }
        for v in 0..n {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                go(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::with_capacity(factorial(n) as usize);
    go(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// A degree-r alternating form on an n-dimensional chart.
///
/// Keys are strictly increasing 1-based index tuples of length r. Forms of
/// degree above n exist only as zero forms.
#[derive(Clone, Debug, PartialEq)]
pub struct AlternatingForm {
    dim: usize,
    degree: usize,
    coeffs: BTreeMap<Vec<usize>, f64>,
}

impl AlternatingForm {
    pub fn zero(dim: usize, degree: usize) -> Self {
        Self { dim, degree, coeffs: BTreeMap::new() }
    }

    pub fn scalar(dim: usize, value: f64) -> Self {
        let mut f = Self::zero(dim, 0);
        if value != 0.0 {
            f.coeffs.insert(Vec::new(), value);
        }
        f
    }

    /// The 1-form Σ cₐ dxᵃ.
    pub fn one_form(coeffs: &[f64]) -> Self {
        let mut f = Self::zero(coeffs.len(), 1);
        for (a, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                f.coeffs.insert(vec![a + 1], c);
            }
        }
        f
    }

    /// dx^{i₁}∧…∧dx^{i_r} for 1-based indices in any order.
    pub fn basis(dim: usize, indices: &[usize]) -> Result<Self> {
        let mut f = Self::zero(dim, indices.len());
        f.add_term(indices, 1.0)?;
        Ok(f)
    }

    /// Adds c·dx^{i₁}∧…∧dx^{i_r}, reordering the indices with the
    /// corresponding sign. Repeated indices contribute nothing.
    pub fn add_term(&mut self, indices: &[usize], c: f64) -> Result<()> {
        if indices.len() != self.degree {
            return Err(Error::DegreeMismatch { expected: self.degree, found: indices.len() });
        }
        if indices.iter().any(|&i| i == 0 || i > self.dim) {
            return Err(Error::InvalidIndex(indices.to_vec()));
        }
        let sign = sort_sign(indices);
        if sign == 0 || c == 0.0 {
            return Ok(());
        }
        let mut key = indices.to_vec();
        key.sort_unstable();
        *self.coeffs.entry(key).or_insert(0.0) += f64::from(sign) * c;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Coefficient of the sorted multi-index `indices` (0 if absent).
    pub fn coeff(&self, indices: &[usize]) -> f64 {
        self.coeffs.get(indices).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.coeffs.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.values().all(|&v| v == 0.0)
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.values_mut().for_each(|v| *v *= a);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        expect_dim(self.dim, other.dim)?;
        if self.degree != other.degree {
            return Err(Error::DegreeMismatch { expected: self.degree, found: other.degree });
        }
        let mut out = self.clone();
        for (k, v) in &other.coeffs {
            *out.coeffs.entry(k.clone()).or_insert(0.0) += v;
        }
        Ok(out)
    }

    /// Exterior product.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        expect_dim(self.dim, other.dim)?;
        let mut out = Self::zero(self.dim, self.degree + other.degree);
        let mut joined = Vec::with_capacity(out.degree);
        for (a, ca) in &self.coeffs {
            for (b, cb) in &other.coeffs {
                joined.clear();
                joined.extend_from_slice(a);
                joined.extend_from_slice(b);
                let sign = sort_sign(&joined);
                if sign == 0 {
                    continue;
                }
                let mut key = joined.clone();
                key.sort_unstable();
                *out.coeffs.entry(key).or_insert(0.0) += f64::from(sign) * ca * cb;
            }
        }
        Ok(out)
    }

    /// Coefficient vector (c₁,…,c_n) of a 1-form.
    pub fn one_form_coeffs(&self) -> Result<DVector<f64>> {
        if self.degree != 1 {
            return Err(Error::DegreeMismatch { expected: 1, found: self.degree });
        }
        Ok(DVector::from_fn(self.dim, |a, _| self.coeff(&[a + 1])))
    }

    /// Largest coefficient difference against another form of the same
    /// shape.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = 0.0f64;
        for (k, v) in &self.coeffs {
            worst = worst.max((v - other.coeff(k)).abs());
        }
        for (k, v) in &other.coeffs {
            if !self.coeffs.contains_key(k) {
                worst = worst.max(v.abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Hodge star of `a` with respect to g at `x`, evaluated term by term from
/// the coordinate formula with √|g|, g^{ij} and the Ricci symbol.
pub fn hodge(g: &MetricField, x: &ChartPoint, a: &AlternatingForm) -> Result<AlternatingForm> {
    let n = g.dim();
    expect_dim(n, a.dim)?;
    if n > MAX_HODGE_DIM {
        return Err(Error::DimensionTooLarge { dim: n, max: MAX_HODGE_DIM });
    }
    let r = a.degree;
    if r > n {
        return Ok(AlternatingForm::zero(n, 0));
    }
    let metric = g.at(x)?;
    let ginv = metric.inverse();
    let prefactor = metric.det().sqrt() / factorial(n - r) as f64;
    let perms = permutations(n);
    let mut out = AlternatingForm::zero(n, n - r);
    let mut tail = Vec::with_capacity(n - r);
    for (key, &c) in &a.coeffs {
        for (perm, sign) in &perms {
            let mut term = c * f64::from(*sign);
            for (m, &i) in key.iter().enumerate() {
                term *= ginv[(i - 1, perm[m])];
            }
            if term == 0.0 {
                continue;
            }
            tail.clear();
            tail.extend(perm[r..].iter().map(|&j| j + 1));
            out.add_term(&tail, term)?;
        }
    }
    out.coeffs.values_mut().for_each(|v| *v *= prefactor);
    Ok(out)
}

/// dF = ∂F/∂xᵃ dxᵃ at `x`.
pub fn differential(f: &ScalarField, x: &ChartPoint) -> Result<AlternatingForm> {
    Ok(AlternatingForm::one_form(f.partials(x)?.as_slice()))
}

/// ♯_g: the vector with components g⁻¹·(coefficients of a).
pub fn sharp(g: &MetricField, x: &ChartPoint, a: &AlternatingForm) -> Result<TangentVector> {
    expect_dim(g.dim(), a.dim)?;
    let c = a.one_form_coeffs()?;
    Ok(TangentVector::from_vector(g.at(x)?.raise(&c)))
}

/// ♭_g: the 1-form with coefficients g·v.
pub fn flat(g: &MetricField, x: &ChartPoint, v: &TangentVector) -> Result<AlternatingForm> {
    expect_dim(g.dim(), v.dim())?;
    let m = g.matrix(x)?;
    Ok(AlternatingForm::one_form((&m * v.components()).as_slice()))
}

/// Metric pairing g⁻¹(a, b) of two 1-forms.
pub fn cometric_inner(g: &MetricField, x: &ChartPoint, a: &AlternatingForm, b: &AlternatingForm) -> Result<f64> {
    let (ca, cb) = (a.one_form_coeffs()?, b.one_form_coeffs()?);
    Ok(ca.dot(&g.at(x)?.raise(&cb)))
}

/// v₀ = (−1)^{n+1} ♯_g(∗(dF₁∧…∧dF_k∧∗(dG∧dF₁∧…∧dF_k))).
pub fn v0_hodge(p: &ControlProblem, x: &ChartPoint) -> Result<TangentVector> {
    let n = p.dim();
    let k = p.k();
    if k + 1 > n {
        return Err(Error::DegreeOverflow { required: k + 1, dim: n });
    }
    let g = p.metric();
    let dfs = p.conserved().iter().map(|f| differential(f, x)).collect::<Result<Vec<_>>>()?;
    let mut inner = differential(p.target(), x)?;
    for df in &dfs {
        inner = inner.wedge(df)?;
    }
    let mut outer = AlternatingForm::scalar(n, 1.0);
    for df in &dfs {
        outer = outer.wedge(df)?;
    }
    let outer = outer.wedge(&hodge(g, x, &inner)?)?;
    let omega = hodge(g, x, &outer)?;
    let sign = if (n + 1).is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign * sharp(g, x, &omega)?)
}

/// det Σ^{(F₁..F_k)}_{(F₁..F_k)} through the index expansion
/// ∂F₁/∂x^{b₁}…∂F_k/∂x^{b_k} g^{b₁s₁}…g^{b_ks_k} det(∂F_j/∂x^{s_i}),
/// summed explicitly over every b and s.
pub fn gram_det_by_expansion(g: &MetricField, fields: &[ScalarField], x: &ChartPoint) -> Result<f64> {
    let n = g.dim();
    let k = fields.len();
    let ginv = g.at(x)?.inverse();
    let partials: Vec<DVector<f64>> = fields.iter().map(|f| f.partials(x)).collect::<Result<_>>()?;
    let mut total = 0.0;
    let mut s = vec![0usize; k];
    loop {
        let jac = DMatrix::from_fn(k, k, |i, j| partials[j][s[i]]);
        let det = crate::gram::determinant(&jac);
        if det != 0.0 {
            let mut weight = 1.0;
            for m in 0..k {
                let mut contraction = 0.0;
                for b in 0..n {
                    contraction += partials[m][b] * ginv[(b, s[m])];
                }
                weight *= contraction;
            }
            total += weight * det;
        }
        // odometer over s ∈ {0..n}^k
        let mut pos = 0;
        loop {
            if pos == k {
                return Ok(total);
            }
            s[pos] += 1;
            if s[pos] < n {
                break;
            }
            s[pos] = 0;
            pos += 1;
        }
    }
}

fn for_each_tuple(n: usize, len: usize, mut f: impl FnMut(&[usize]) -> bool) -> bool {
    let mut t = vec![1usize; len];
    loop {
        if !f(&t) {
            return false;
        }
        let mut pos = 0;
        loop {
            if pos == len {
                return true;
            }
            t[pos] += 1;
            if t[pos] <= n {
                break;
            }
            t[pos] = 1;
            pos += 1;
        }
    }
}

/// Brute-force check of
/// δ^{j₁…j_r i_{r+1}…i_p}_{i₁…i_r i_{r+1}…i_p} = ((n−r)!/(n−p)!) δ^{j₁…j_r}_{i₁…i_r}
/// with the trailing indices summed over 1..n, for every free index choice.
/// Returns false when 0 < r ≤ p ≤ n ≤ 6 does not hold.
pub fn delta_contraction_check(n: usize, r: usize, p: usize) -> bool {
    if !(r <= p && p <= n && n <= 6) {
        return false;
    }
    let factor = (factorial(n - r) / factorial(n - p)) as i64;
    let mut upper = vec![0usize; p];
    let mut lower = vec![0usize; p];
    for_each_tuple(n, r, |i| {
        for_each_tuple(n, r, |j| {
            lower[..r].copy_from_slice(i);
            upper[..r].copy_from_slice(j);
            let mut sum = 0i64;
            for_each_tuple(n, p - r, |t| {
                lower[r..].copy_from_slice(t);
                upper[r..].copy_from_slice(t);
                sum += i64::from(gen_kronecker(&upper, &lower));
                true
            });
            sum == factor * i64::from(gen_kronecker(j, i))
        })
    })
}

/// Brute-force check of δ^{j₁…j_r}_{i₁…i_r} = ε_{i₁…i_r} ε_{j₁…j_r} over all
/// index tuples in {1..r}^r.
pub fn kronecker_epsilon_check(r: usize) -> bool {
    for_each_tuple(r, r, |i| {
        for_each_tuple(r, r, |j| gen_kronecker(j, i) == ricci_epsilon(i) * ricci_epsilon(j))
    })
}

/// The same product law over tuples in {1..n}^r, where the ε factors are
/// the signs relative to sorted order and both tuples must share one
/// index set.
pub fn kronecker_sign_check(n: usize, r: usize) -> bool {
    for_each_tuple(n, r, |i| {
        for_each_tuple(n, r, |j| {
            let mut si = i.to_vec();
            let mut sj = j.to_vec();
            si.sort_unstable();
            sj.sort_unstable();
            let expected = if si == sj { sort_sign(i) * sort_sign(j) } else { 0 };
            gen_kronecker(j, i) == expected
        })
    })
}

/// Brute-force check of ε_{i₁…i_{r−1}q} = (−1)^{r−k−1} ε_{i₁…i_k q i_{k+1}…i_{r−1}}
/// for every tuple in {1..r}^r and every insertion position k.
pub fn ricci_shift_check(r: usize) -> bool {
    if r == 0 {
        return true;
    }
    for_each_tuple(r, r, |t| {
        let (head, q) = (&t[..r - 1], t[r - 1]);
        (0..r).all(|k| {
            let mut moved = head[..k].to_vec();
            moved.push(q);
            moved.extend_from_slice(&head[k..]);
            let sign = if (r - k - 1).is_multiple_of(2) { 1 } else { -1 };
            ricci_epsilon(t) == sign * ricci_epsilon(&moved)
        })
    })
}
