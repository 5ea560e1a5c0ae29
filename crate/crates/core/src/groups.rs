//! Compact group actions on vectors and point clouds.
//!
//! Linear kinds act either on a whole sample flattened to a vector
//! (`FiniteMatrix`, `PermuteFirstM`, `Trivial`) or row-wise on the points of
//! a cloud (`CyclicRotation2D` on planar points, `So3` on 3D points).
//! `VerticalShift` is the two-element group translating the z coordinate by a
//! fixed offset on the periodic domain `[-o/2, 3o/2)`; it is affine rather
//! than linear and has no matrix representation.
//!
//! Text forms accepted by [`GroupAction::parse`]: `trivial`, `trivial:dim=5`,
//! `c4` (any `c<r>`), `so3`, `shift:z=1.0`, `perm:first=13,dim=20` and
//! `sym:n=3` (all permutations of `n` coordinates as explicit matrices).

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, Matrix3, Vector3, Vector4};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance for orthogonality and closure checks.
pub const GROUP_TOL: f64 = 1e-10;

/// Finite group given by explicit orthogonal matrices, with its Cayley table.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMatrixGroup {
    mats: Vec<DMatrix<f64>>,
    table: Vec<Vec<usize>>,
    inverse: Vec<usize>,
}

impl FiniteMatrixGroup {
    /// Validates orthogonality, the presence of the identity, closure under
    /// composition and inverses. Element 0 is reordered to be the identity.
    pub fn new(mut mats: Vec<DMatrix<f64>>) -> Result<Self> {
        if mats.is_empty() {
            return Err(Error::Config("finite group needs at least one element".into()));
        }
        let d = mats[0].nrows();
        let eye = DMatrix::<f64>::identity(d, d);
        for m in &mats {
            if m.shape() != (d, d) {
                return Err(Error::Dimension { expected: d, got: m.nrows() });
            }
            if linalg::frobenius(&(m.transpose() * m - &eye)) > GROUP_TOL * (d as f64).max(1.0) {
                return Err(Error::Config("group element is not orthogonal".into()));
            }
        }
        let find = |mats: &[DMatrix<f64>], target: &DMatrix<f64>| {
            mats.iter().position(|m| linalg::frobenius(&(m - target)) < 1e-8)
        };
        let id = find(&mats, &eye)
            .ok_or_else(|| Error::Config("group is missing the identity".into()))?;
        mats.swap(0, id);
        let r = mats.len();
        let mut table = vec![vec![0usize; r]; r];
        for a in 0..r {
            for b in 0..r {
                let prod = &mats[a] * &mats[b];
                table[a][b] = find(&mats, &prod)
                    .ok_or_else(|| Error::Config("element set is not closed".into()))?;
            }
        }
        let inverse = (0..r)
            .map(|a| {
                (0..r)
                    .find(|&b| table[a][b] == 0)
                    .ok_or_else(|| Error::Config("element without inverse".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FiniteMatrixGroup { mats, table, inverse })
    }

    /// All `n!` permutation matrices of `R^n` (n ≤ 7).
    pub fn symmetric(n: usize) -> Result<Self> {
        if n == 0 || n > 7 {
            return Err(Error::Config(format!("sym:n={n} out of range 1..=7")));
        }
        let mut perms = Vec::new();
        permutations(&mut (0..n).collect::<Vec<_>>(), 0, &mut perms);
        let mats = perms.iter().map(|p| permutation_matrix(p, n)).collect();
        Self::new(mats)
    }

    pub fn dim(&self) -> usize {
        self.mats[0].nrows()
    }

    pub fn order(&self) -> usize {
        self.mats.len()
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.mats
    }
}

fn permutations(v: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == v.len() {
        out.push(v.clone());
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permutations(v, k + 1, out);
        v.swap(k, i);
    }
}

/// Matrix moving coordinate `i` to position `perm[i]`, embedded in `R^d`.
fn permutation_matrix(perm: &[usize], d: usize) -> DMatrix<f64> {
    let mut m = DMatrix::identity(d, d);
    for i in 0..perm.len() {
        m[(i, i)] = 0.0;
    }
    for (i, &j) in perm.iter().enumerate() {
        m[(j, i)] = 1.0;
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroupAction {
    /// The one-element group; `dim = 0` acts on samples of any shape.
    Trivial { dim: usize },
    FiniteMatrix(FiniteMatrixGroup),
    CyclicRotation2D { order: usize },
    VerticalShift { offset: f64 },
    So3,
    /// `S_m` permuting the first `m` of `dim` coordinates.
    PermuteFirstM { m: usize, dim: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroupElement {
    /// Index into the element ordering of a small finite group.
    Index(usize),
    /// `perm[i]` is the destination of coordinate `i`.
    Perm(Vec<usize>),
    Rotation(Matrix3<f64>),
}

impl GroupAction {
    pub fn cyclic(order: usize) -> Self {
        GroupAction::CyclicRotation2D { order }
    }

    pub fn permute_first(m: usize, dim: usize) -> Result<Self> {
        if m == 0 || m > dim {
            return Err(Error::Config(format!("perm:first={m} needs 1 <= m <= dim={dim}")));
        }
        Ok(GroupAction::PermuteFirstM { m, dim })
    }

    /// Parse the short text form. `dim` fills in the ambient dimension for
    /// `perm` and `trivial` when the text does not specify it.
    pub fn parse(text: &str, dim: Option<usize>) -> Result<Self> {
        let text = text.trim().to_ascii_lowercase();
        let (head, args) = match text.split_once(':') {
            Some((h, a)) => (h.to_string(), a.to_string()),
            None => (text.clone(), String::new()),
        };
        let mut kv = std::collections::BTreeMap::new();
        for part in args.split(',').filter(|s| !s.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value in group spec '{text}'")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let int = |k: &str| -> Result<Option<usize>> {
            kv.get(k)
                .map(|v| v.parse::<usize>().map_err(|e| Error::Parse(format!("{k}={v}: {e}"))))
                .transpose()
        };
        let check_keys = |allowed: &[&str]| -> Result<()> {
            match kv.keys().find(|k| !allowed.contains(&k.as_str())) {
                Some(k) => Err(Error::Parse(format!("unknown key '{k}' in group spec '{text}'"))),
                None => Ok(()),
            }
        };
        match head.as_str() {
            "trivial" | "e" => {
                check_keys(&["dim"])?;
                Ok(GroupAction::Trivial { dim: int("dim")?.or(dim).unwrap_or(0) })
            }
            "so3" => {
                check_keys(&[])?;
                Ok(GroupAction::So3)
            }
            "shift" => {
                check_keys(&["z"])?;
                let z = kv
                    .get("z")
                    .map(|v| v.parse::<f64>().map_err(|e| Error::Parse(format!("z={v}: {e}"))))
                    .transpose()?
                    .unwrap_or(1.0);
                if !(z.is_finite() && z > 0.0) {
                    return Err(Error::Parse(format!("shift offset must be positive, got {z}")));
                }
                Ok(GroupAction::VerticalShift { offset: z })
            }
            "perm" => {
                check_keys(&["first", "dim"])?;
                let m = int("first")?
                    .ok_or_else(|| Error::Parse("perm needs first=<m>".into()))?;
                let d = int("dim")?.or(dim).unwrap_or(m);
                GroupAction::permute_first(m, d)
            }
            "sym" => {
                check_keys(&["n"])?;
                let n = int("n")?.ok_or_else(|| Error::Parse("sym needs n=<n>".into()))?;
                Ok(GroupAction::FiniteMatrix(FiniteMatrixGroup::symmetric(n)?))
            }
            h if h.starts_with('c') && h.len() > 1 => {
                check_keys(&[])?;
                let r = h[1..]
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("cyclic order '{h}': {e}")))?;
                if r == 0 {
                    return Err(Error::Parse("cyclic order must be positive".into()));
                }
                Ok(GroupAction::CyclicRotation2D { order: r })
            }
            _ => Err(Error::Parse(format!("unknown group spec '{text}'"))),
        }
    }

    /// Dimension of the space acted on: whole-vector length for vector
    /// actions, point dimension for row-wise actions, 0 for "any".
    pub fn dim(&self) -> usize {
        match self {
            GroupAction::Trivial { dim } => *dim,
            GroupAction::FiniteMatrix(g) => g.dim(),
            GroupAction::CyclicRotation2D { .. } => 2,
            GroupAction::VerticalShift { .. } | GroupAction::So3 => 3,
            GroupAction::PermuteFirstM { dim, .. } => *dim,
        }
    }

    /// Group order for groups small enough to enumerate; `None` for SO(3)
    /// and for permutation groups whose order overflows.
    pub fn order(&self) -> Option<usize> {
        match self {
            GroupAction::Trivial { .. } => Some(1),
            GroupAction::FiniteMatrix(g) => Some(g.order()),
            GroupAction::CyclicRotation2D { order } => Some(*order),
            GroupAction::VerticalShift { .. } => Some(2),
            GroupAction::So3 => None,
            GroupAction::PermuteFirstM { m, .. } => {
                (1..=*m).try_fold(1usize, |acc, k| acc.checked_mul(k))
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        !matches!(self, GroupAction::So3)
    }

    /// True when elements are addressed by [`GroupElement::Index`].
    fn indexed(&self) -> bool {
        matches!(
            self,
            GroupAction::Trivial { .. }
                | GroupAction::FiniteMatrix(_)
                | GroupAction::CyclicRotation2D { .. }
                | GroupAction::VerticalShift { .. }
        )
    }

    /// Enumerate the elements in their canonical order (identity first).
    pub fn elements(&self) -> Result<Vec<GroupElement>> {
        match self {
            GroupAction::So3 => Err(Error::UnsupportedAction("SO(3) cannot be enumerated".into())),
            GroupAction::PermuteFirstM { m, .. } => {
                if *m > 8 {
                    return Err(Error::UnsupportedAction(format!("S_{m} is too large to enumerate")));
                }
                let mut perms = Vec::new();
                permutations(&mut (0..*m).collect::<Vec<_>>(), 0, &mut perms);
                Ok(perms.into_iter().map(GroupElement::Perm).collect())
            }
            _ => Ok((0..self.order().expect("indexed groups are finite"))
                .map(GroupElement::Index)
                .collect()),
        }
    }

    pub fn identity(&self) -> GroupElement {
        match self {
            GroupAction::So3 => GroupElement::Rotation(Matrix3::identity()),
            GroupAction::PermuteFirstM { m, .. } => GroupElement::Perm((0..*m).collect()),
            _ => GroupElement::Index(0),
        }
    }

    fn check_element(&self, g: &GroupElement) -> Result<()> {
        let ok = match (self, g) {
            (GroupAction::So3, GroupElement::Rotation(_)) => true,
            (GroupAction::PermuteFirstM { m, .. }, GroupElement::Perm(p)) => p.len() == *m,
            (_, GroupElement::Index(i)) if self.indexed() => {
                *i < self.order().expect("indexed groups are finite")
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("element {g:?} does not belong to {self}")))
        }
    }

    /// `a ∘ b`: apply `b` first, then `a`.
    pub fn compose(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
        self.check_element(a)?;
        self.check_element(b)?;
        Ok(match (self, a, b) {
            (GroupAction::So3, GroupElement::Rotation(ra), GroupElement::Rotation(rb)) => {
                GroupElement::Rotation(ra * rb)
            }
            (_, GroupElement::Perm(pa), GroupElement::Perm(pb)) => {
                GroupElement::Perm(pb.iter().map(|&j| pa[j]).collect())
            }
            (GroupAction::FiniteMatrix(g), GroupElement::Index(i), GroupElement::Index(j)) => {
                GroupElement::Index(g.table[*i][*j])
            }
            (GroupAction::CyclicRotation2D { order }, GroupElement::Index(i), GroupElement::Index(j)) => {
                GroupElement::Index((i + j) % order)
            }
            (GroupAction::VerticalShift { .. }, GroupElement::Index(i), GroupElement::Index(j)) => {
                GroupElement::Index(i ^ j)
            }
            (GroupAction::Trivial { .. }, _, _) => GroupElement::Index(0),
            _ => unreachable!("elements validated above"),
        })
    }

    pub fn inverse(&self, g: &GroupElement) -> Result<GroupElement> {
        self.check_element(g)?;
        Ok(match (self, g) {
            (_, GroupElement::Rotation(r)) => GroupElement::Rotation(r.transpose()),
            (_, GroupElement::Perm(p)) => {
                let mut inv = vec![0; p.len()];
                for (i, &j) in p.iter().enumerate() {
                    inv[j] = i;
                }
                GroupElement::Perm(inv)
            }
            (GroupAction::FiniteMatrix(fg), GroupElement::Index(i)) => GroupElement::Index(fg.inverse[*i]),
            (GroupAction::CyclicRotation2D { order }, GroupElement::Index(i)) => {
                GroupElement::Index((order - i % order) % order)
            }
            (_, GroupElement::Index(i)) => GroupElement::Index(*i),
        })
    }

    /// Orthogonal matrix of `g` on the space returned by [`dim`](Self::dim).
    /// `None` for the affine vertical shift and for `Trivial { dim: 0 }`.
    pub fn matrix(&self, g: &GroupElement) -> Result<Option<DMatrix<f64>>> {
        self.check_element(g)?;
        Ok(match (self, g) {
            (GroupAction::Trivial { dim }, _) => {
                (*dim > 0).then(|| DMatrix::identity(*dim, *dim))
            }
            (GroupAction::FiniteMatrix(fg), GroupElement::Index(i)) => Some(fg.mats[*i].clone()),
            (GroupAction::CyclicRotation2D { order }, GroupElement::Index(k)) => {
                let (s, c) = cyclic_sin_cos(*k, *order);
                Some(DMatrix::from_row_slice(2, 2, &[c, -s, s, c]))
            }
            (GroupAction::So3, GroupElement::Rotation(r)) => {
                Some(DMatrix::from_iterator(3, 3, r.iter().cloned()))
            }
            (GroupAction::PermuteFirstM { dim, .. }, GroupElement::Perm(p)) => {
                Some(permutation_matrix(p, *dim))
            }
            (GroupAction::VerticalShift { .. }, _) => None,
            _ => unreachable!("element validated above"),
        })
    }

    /// `g · x`.
    pub fn apply(&self, g: &GroupElement, x: &Sample) -> Result<Sample> {
        self.check_element(g)?;
        let mut out = x.clone();
        match (self, g) {
            (GroupAction::Trivial { dim }, _) => {
                if *dim > 0 && x.coords.len() != *dim {
                    return Err(Error::Dimension { expected: *dim, got: x.coords.len() });
                }
            }
            (GroupAction::FiniteMatrix(fg), GroupElement::Index(i)) => {
                let d = fg.dim();
                if x.coords.len() != d {
                    return Err(Error::Dimension { expected: d, got: x.coords.len() });
                }
                let m = &fg.mats[*i];
                for r in 0..d {
                    out.coords[r] = (0..d).map(|c| m[(r, c)] * x.coords[c]).sum();
                }
            }
            (GroupAction::PermuteFirstM { m, dim }, GroupElement::Perm(p)) => {
                if x.coords.len() != *dim {
                    return Err(Error::Dimension { expected: *dim, got: x.coords.len() });
                }
                for i in 0..*m {
                    out.coords[p[i]] = x.coords[i];
                }
            }
            (GroupAction::CyclicRotation2D { order }, GroupElement::Index(k)) => {
                if x.dim != 2 {
                    return Err(Error::Dimension { expected: 2, got: x.dim });
                }
                let (s, c) = cyclic_sin_cos(*k, *order);
                for row in out.coords.chunks_mut(2) {
                    let (a, b) = (row[0], row[1]);
                    row[0] = c * a - s * b;
                    row[1] = s * a + c * b;
                }
            }
            (GroupAction::So3, GroupElement::Rotation(r)) => {
                if x.dim != 3 {
                    return Err(Error::Dimension { expected: 3, got: x.dim });
                }
                for row in out.coords.chunks_mut(3) {
                    let v = r * Vector3::new(row[0], row[1], row[2]);
                    row.copy_from_slice(v.as_slice());
                }
            }
            (GroupAction::VerticalShift { offset }, GroupElement::Index(k)) => {
                if x.dim != 3 {
                    return Err(Error::Dimension { expected: 3, got: x.dim });
                }
                if *k == 1 {
                    for row in out.coords.chunks_mut(3) {
                        row[2] = shift_periodic(row[2], *offset);
                    }
                }
            }
            _ => unreachable!("element validated above"),
        }
        Ok(out)
    }

    /// Uniform (Haar) sample. SO(3) uses a unit quaternion drawn from a
    /// normalized 4D standard Gaussian.
    pub fn haar_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GroupElement {
        match self {
            GroupAction::So3 => {
                let q = loop {
                    let v = Vector4::<f64>::from_fn(|_, _| rng.sample(StandardNormal));
                    let n = v.norm();
                    if n > 1e-12 {
                        break v / n;
                    }
                };
                GroupElement::Rotation(quaternion_to_matrix(q[0], q[1], q[2], q[3]))
            }
            GroupAction::PermuteFirstM { m, .. } => {
                let mut p: Vec<usize> = (0..*m).collect();
                p.shuffle(rng);
                GroupElement::Perm(p)
            }
            _ => {
                let r = self.order().expect("indexed groups are finite");
                GroupElement::Index(rng.random_range(0..r))
            }
        }
    }

    /// Orthogonal projection onto the invariant subspace, `(1/|G|) Σ_g g`.
    pub fn invariant_projection(&self) -> Result<DMatrix<f64>> {
        match self {
            GroupAction::Trivial { dim } if *dim > 0 => Ok(DMatrix::identity(*dim, *dim)),
            GroupAction::PermuteFirstM { m, dim } => {
                let mut p = DMatrix::identity(*dim, *dim);
                let w = 1.0 / *m as f64;
                for i in 0..*m {
                    for j in 0..*m {
                        p[(i, j)] = w;
                    }
                }
                Ok(p)
            }
            GroupAction::FiniteMatrix(_) | GroupAction::CyclicRotation2D { .. } => {
                let elems = self.elements()?;
                let d = self.dim();
                let mut acc = DMatrix::zeros(d, d);
                for g in &elems {
                    acc += self.matrix(g)?.expect("linear kind");
                }
                Ok(acc / elems.len() as f64)
            }
            _ => Err(Error::UnsupportedAction(format!(
                "invariant projection is only defined for finite linear actions, not {self}"
            ))),
        }
    }

    /// Projection on `R^d`, letting the dimension-free trivial group act as
    /// the identity on any `d`.
    pub fn invariant_projection_for(&self, d: usize) -> Result<DMatrix<f64>> {
        match self {
            GroupAction::Trivial { dim: 0 } => Ok(DMatrix::identity(d, d)),
            _ if self.dim() != d => Err(Error::Dimension { expected: self.dim(), got: d }),
            _ => self.invariant_projection(),
        }
    }

    /// Orthonormal bases `(V0, Vperp)` as matrix columns.
    ///
    /// For `PermuteFirstM` the bases are closed-form: the normalized all-ones
    /// vector on the first `m` coordinates followed by the untouched unit
    /// vectors span `V0`, and Helmert contrasts span `Vperp`. Otherwise the
    /// eigenvectors of `P0` are split at eigenvalue 0.5. Every column has
    /// its first nonzero entry positive.
    pub fn invariant_basis(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if let GroupAction::PermuteFirstM { m, dim } = self {
            let (m, d) = (*m, *dim);
            let d0 = d - m + 1;
            let mut v0 = DMatrix::zeros(d, d0);
            for i in 0..m {
                v0[(i, 0)] = 1.0 / (m as f64).sqrt();
            }
            for (col, j) in (m..d).enumerate() {
                v0[(j, col + 1)] = 1.0;
            }
            let mut vp = DMatrix::zeros(d, m - 1);
            for k in 1..m {
                let norm = ((k * (k + 1)) as f64).sqrt();
                for i in 0..k {
                    vp[(i, k - 1)] = 1.0 / norm;
                }
                vp[(k, k - 1)] = -(k as f64) / norm;
            }
            return Ok((v0, vp));
        }
        let p0 = self.invariant_projection()?;
        let eig = linalg::symmetrize(&p0).symmetric_eigen();
        let d = p0.nrows();
        let (inv, perp): (Vec<usize>, Vec<usize>) = (0..d).partition(|&k| eig.eigenvalues[k] > 0.5);
        let take = |idx: &[usize]| {
            let mut m = DMatrix::zeros(d, idx.len());
            for (c, &k) in idx.iter().enumerate() {
                m.set_column(c, &eig.eigenvectors.column(k));
            }
            linalg::canonical_signs(&mut m);
            m
        };
        Ok((take(&inv), take(&perp)))
    }

    /// Dimension of the invariant subspace.
    pub fn invariant_dim(&self) -> Result<usize> {
        match self {
            GroupAction::PermuteFirstM { m, dim } => Ok(dim - m + 1),
            _ => Ok(self.invariant_basis()?.0.ncols()),
        }
    }

    /// Group average `(1/|G|) Σ_g g S g^T`.
    pub fn symmetrize_covariance(&self, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if let GroupAction::Trivial { dim: 0 } = self {
            return Ok(s.clone());
        }
        let d = self.dim();
        if s.shape() != (d, d) {
            return Err(Error::Dimension { expected: d, got: s.nrows() });
        }
        match self {
            GroupAction::Trivial { dim } if *dim > 0 => Ok(s.clone()),
            GroupAction::PermuteFirstM { m, dim } => {
                // Average over S_m: the m×m block keeps its mean diagonal and
                // mean off-diagonal; the cross block is averaged over the m rows.
                let (m, d) = (*m, *dim);
                let mut out = s.clone();
                let diag = (0..m).map(|i| s[(i, i)]).sum::<f64>() / m as f64;
                let off = if m > 1 {
                    let total: f64 = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).map(|ij| s[ij]).sum();
                    (total - diag * m as f64) / (m * (m - 1)) as f64
                } else {
                    0.0
                };
                for i in 0..m {
                    for j in 0..m {
                        out[(i, j)] = if i == j { diag } else { off };
                    }
                }
                for j in m..d {
                    let col = (0..m).map(|i| s[(i, j)]).sum::<f64>() / m as f64;
                    let row = (0..m).map(|i| s[(j, i)]).sum::<f64>() / m as f64;
                    for i in 0..m {
                        out[(i, j)] = col;
                        out[(j, i)] = row;
                    }
                }
                Ok(out)
            }
            GroupAction::FiniteMatrix(_) | GroupAction::CyclicRotation2D { .. } => {
                let elems = self.elements()?;
                let mut acc = DMatrix::zeros(d, d);
                for g in &elems {
                    let m = self.matrix(g)?.expect("linear kind");
                    acc += &m * s * m.transpose();
                }
                Ok(acc / elems.len() as f64)
            }
            _ => Err(Error::UnsupportedAction(format!(
                "covariance symmetrization is only defined for finite linear actions, not {self}"
            ))),
        }
    }
}

impl fmt::Display for GroupAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupAction::Trivial { dim: 0 } => write!(f, "trivial"),
            GroupAction::Trivial { dim } => write!(f, "trivial:dim={dim}"),
            GroupAction::FiniteMatrix(g) => write!(f, "finite(order={},dim={})", g.order(), g.dim()),
            GroupAction::CyclicRotation2D { order } => write!(f, "c{order}"),
            GroupAction::VerticalShift { offset } => write!(f, "shift:z={offset}"),
            GroupAction::So3 => write!(f, "so3"),
            GroupAction::PermuteFirstM { m, dim } => write!(f, "perm:first={m},dim={dim}"),
        }
    }
}

/// Exact values at multiples of a quarter turn.
fn cyclic_sin_cos(k: usize, order: usize) -> (f64, f64) {
    let k = k % order;
    if (4 * k) % order == 0 {
        return match 4 * k / order {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        };
    }
    (2.0 * PI * k as f64 / order as f64).sin_cos()
}

fn shift_periodic(z: f64, offset: f64) -> f64 {
    let period = 2.0 * offset;
    (z + offset + offset / 2.0).rem_euclid(period) - offset / 2.0
}

pub fn quaternion_to_matrix(w: f64, x: f64, y: f64, z: f64) -> Matrix3<f64> {
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn s3() -> GroupAction {
        GroupAction::parse("sym:n=3", None).unwrap()
    }

    fn assert_orthogonal(m: &DMatrix<f64>) {
        let d = m.nrows();
        assert!(linalg::frobenius(&(m.transpose() * m - DMatrix::identity(d, d))) < 1e-10);
    }

    #[test]
    fn parse_forms() {
        assert_eq!(GroupAction::parse("c4", None).unwrap(), GroupAction::cyclic(4));
        assert_eq!(GroupAction::parse("SO3", None).unwrap(), GroupAction::So3);
        assert_eq!(
            GroupAction::parse("perm:first=13", Some(20)).unwrap(),
            GroupAction::PermuteFirstM { m: 13, dim: 20 }
        );
        assert_eq!(
            GroupAction::parse("shift:z=1.0", None).unwrap(),
            GroupAction::VerticalShift { offset: 1.0 }
        );
        assert!(GroupAction::parse("perm:first=3,bogus=1", None).is_err());
        assert!(GroupAction::parse("c0", None).is_err());
        assert!(GroupAction::parse("nonsense", None).is_err());
        let g = GroupAction::parse("perm:first=4,dim=9", None).unwrap();
        assert_eq!(GroupAction::parse(&g.to_string(), None).unwrap(), g);
    }

    #[test]
    fn identity_leaves_samples_alone() {
        let x = Sample::cloud(vec![0.3, -1.2, 2.0, 4.0, 5.0, 6.0], 3);
        for g in [GroupAction::So3, GroupAction::VerticalShift { offset: 1.0 }, GroupAction::Trivial { dim: 0 }] {
            assert_eq!(g.apply(&g.identity(), &x).unwrap(), x);
        }
    }

    #[test]
    fn quarter_turn_four_times() {
        let g = GroupAction::cyclic(4);
        let q = GroupElement::Index(1);
        let mut x = Sample::vector(vec![1.0, 0.0]);
        for _ in 0..4 {
            x = g.apply(&q, &x).unwrap();
        }
        assert!((x.coords[0] - 1.0).abs() < 1e-15 && x.coords[1].abs() < 1e-15);
    }

    #[test]
    fn composition_law_holds() {
        let mut rng = rng_from_seed(3);
        let x = Sample::cloud((0..12).map(|i| (i as f64 * 0.7).sin()).collect(), 3);
        let g = GroupAction::So3;
        let (a, b) = (g.haar_sample(&mut rng), g.haar_sample(&mut rng));
        let lhs = g.apply(&a, &g.apply(&b, &x).unwrap()).unwrap();
        let rhs = g.apply(&g.compose(&a, &b).unwrap(), &x).unwrap();
        for (u, v) in lhs.coords.iter().zip(&rhs.coords) {
            assert!((u - v).abs() < 1e-12);
        }
        let p = GroupAction::permute_first(4, 6).unwrap();
        let x = Sample::vector(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let (a, b) = (p.haar_sample(&mut rng), p.haar_sample(&mut rng));
        let lhs = p.apply(&a, &p.apply(&b, &x).unwrap()).unwrap();
        let rhs = p.apply(&p.compose(&a, &b).unwrap(), &x).unwrap();
        assert_eq!(lhs, rhs);
        let ai = p.inverse(&a).unwrap();
        assert_eq!(p.apply(&ai, &p.apply(&a, &x).unwrap()).unwrap(), x);
    }

    #[test]
    fn rotation_preserves_pairwise_distances() {
        let mut rng = rng_from_seed(11);
        let x = Sample::cloud((0..30).map(|i| ((i * 7 % 11) as f64) - 5.0).collect(), 3);
        let g = GroupAction::So3;
        let y = g.apply(&g.haar_sample(&mut rng), &x).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let d = |s: &Sample| {
                    s.point(i).iter().zip(s.point(j)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
                };
                assert!((d(&x) - d(&y)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn so3_samples_are_proper_rotations() {
        let mut rng = rng_from_seed(5);
        let g = GroupAction::So3;
        for _ in 0..200 {
            let m = g.matrix(&g.haar_sample(&mut rng)).unwrap().unwrap();
            assert_orthogonal(&m);
            assert!((m.determinant() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn finite_groups_are_closed_and_orthogonal() {
        for g in [s3(), GroupAction::cyclic(6), GroupAction::permute_first(3, 5).unwrap()] {
            let elems = g.elements().unwrap();
            assert!(elems.len() <= 64);
            for a in &elems {
                assert_orthogonal(&g.matrix(a).unwrap().unwrap());
                let ai = g.inverse(a).unwrap();
                assert_eq!(g.compose(a, &ai).unwrap(), g.identity());
                for b in &elems {
                    let ab = g.compose(a, b).unwrap();
                    assert!(elems.contains(&ab));
                    let prod = g.matrix(a).unwrap().unwrap() * g.matrix(b).unwrap().unwrap();
                    assert!(linalg::frobenius(&(prod - g.matrix(&ab).unwrap().unwrap())) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn non_closed_set_is_rejected() {
        let rot = |t: f64| DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        let r = FiniteMatrixGroup::new(vec![DMatrix::identity(2, 2), rot(1.0)]);
        assert!(r.is_err());
    }

    #[test]
    fn haar_is_deterministic_under_seed() {
        let g = GroupAction::So3;
        let a: Vec<_> = { let mut r = rng_from_seed(9); (0..5).map(|_| g.haar_sample(&mut r)).collect() };
        let b: Vec<_> = { let mut r = rng_from_seed(9); (0..5).map(|_| g.haar_sample(&mut r)).collect() };
        assert_eq!(a, b);
    }

    #[test]
    fn trivial_group_always_identity() {
        let g = GroupAction::Trivial { dim: 0 };
        let mut rng = rng_from_seed(1);
        for _ in 0..10 {
            assert_eq!(g.haar_sample(&mut rng), g.identity());
        }
    }

    #[test]
    fn projection_properties() {
        for g in [s3(), GroupAction::permute_first(4, 7).unwrap(), GroupAction::cyclic(4), GroupAction::Trivial { dim: 3 }] {
            let p = g.invariant_projection().unwrap();
            assert!(linalg::frobenius(&(&p * &p - &p)) < 1e-10);
            assert!(linalg::frobenius(&(p.transpose() - &p)) < 1e-10);
            for e in g.elements().unwrap() {
                let m = g.matrix(&e).unwrap().unwrap();
                assert!(linalg::frobenius(&(&m * &p - &p)) < 1e-10);
            }
            let (v0, vp) = g.invariant_basis().unwrap();
            assert_eq!(v0.ncols() + vp.ncols(), p.nrows());
            assert!(linalg::frobenius(&(&v0 * v0.transpose() - &p)) < 1e-10);
            assert!(linalg::frobenius(&(v0.transpose() * &vp)) < 1e-10);
        }
    }

    #[test]
    fn projection_closed_form_for_first_m() {
        // d = 7, d0 = 4: S_m on m = d - d0 + 1 = 4 coordinates
        let g = GroupAction::permute_first(4, 7).unwrap();
        let p = g.invariant_projection().unwrap();
        assert_eq!(g.invariant_dim().unwrap(), 4);
        let rank = p.clone().symmetric_eigenvalues().iter().filter(|&&s| s > 0.5).count();
        assert_eq!(rank, 4);
        assert!((p[(0, 3)] - 0.25).abs() < 1e-15);
        assert_eq!(p[(5, 5)], 1.0);
        assert_eq!(p[(0, 5)], 0.0);
    }

    #[test]
    fn s3_projection_is_rank_one_onto_ones() {
        let p = s3().invariant_projection().unwrap();
        let expect = DMatrix::from_element(3, 3, 1.0 / 3.0);
        assert!(linalg::frobenius(&(p - expect)) < 1e-12);
        let (v0, _) = s3().invariant_basis().unwrap();
        assert_eq!(v0.ncols(), 1);
        for i in 0..3 {
            assert!((v0[(i, 0)] - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn so3_projection_is_unsupported() {
        assert!(matches!(GroupAction::So3.invariant_projection(), Err(Error::UnsupportedAction(_))));
        let s = DMatrix::identity(3, 3);
        assert!(GroupAction::So3.symmetrize_covariance(&s).is_err());
    }

    #[test]
    fn symmetrize_s3_diagonal() {
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let out = s3().symmetrize_covariance(&s).unwrap();
        for i in 0..3 {
            assert!((out[(i, i)] - 2.0).abs() < 1e-12);
            for j in 0..3 {
                if i != j {
                    assert!(out[(i, j)].abs() < 1e-12);
                }
            }
        }
        let eye = DMatrix::identity(3, 3);
        assert!(linalg::frobenius(&(s3().symmetrize_covariance(&eye).unwrap() - eye)) < 1e-12);
    }

    #[test]
    fn closed_form_symmetrization_matches_enumeration() {
        // perm:first=3 on R^5 vs explicit average over all 6 elements.
        let g = GroupAction::permute_first(3, 5).unwrap();
        let a = DMatrix::from_fn(5, 5, |i, j| ((i * 5 + j) as f64 * 0.37).sin());
        let s = &a * a.transpose();
        let fast = g.symmetrize_covariance(&s).unwrap();
        let mut slow = DMatrix::zeros(5, 5);
        let elems = g.elements().unwrap();
        for e in &elems {
            let m = g.matrix(e).unwrap().unwrap();
            slow += &m * &s * m.transpose();
        }
        slow /= elems.len() as f64;
        assert!(linalg::frobenius(&(fast - slow)) < 1e-12);
    }

    #[test]
    fn shift_is_an_involution() {
        let g = GroupAction::VerticalShift { offset: 1.0 };
        let x = Sample::vector(vec![0.5, -2.0, 0.03]);
        let y = g.apply(&GroupElement::Index(1), &x).unwrap();
        assert!((y.coords[2] - 1.03).abs() < 1e-12);
        let z = g.apply(&GroupElement::Index(1), &y).unwrap();
        assert!((z.coords[2] - 0.03).abs() < 1e-12);
        assert_eq!(g.matrix(&GroupElement::Index(1)).unwrap(), None);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let g = GroupAction::So3;
        assert!(matches!(
            g.apply(&g.identity(), &Sample::vector(vec![1.0, 2.0])),
            Err(Error::Dimension { .. })
        ));
        let p = GroupAction::permute_first(2, 4).unwrap();
        assert!(p.apply(&p.identity(), &Sample::vector(vec![1.0; 3])).is_err());
    }
}
