//! Spin-chain Hamiltonians split into two internally commuting groups.
//!
//! Single-site fields are absorbed into the bond terms: a site shared by two
//! bonds contributes half of its field to each, a chain-end site contributes
//! its full field to its only bond. Each absorbed piece acts on the bond's own
//! support, so the groups stay internally commuting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, hermiticity_defect, identity, kron, kron_embed, max_abs, pauli_x, pauli_y, pauli_z,
    DenseOperator, C64, HERMITIAN_TOL,
};

/// Which half of the two-group split a term belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Odd,
    Even,
}

impl Group {
    pub fn other(self) -> Self {
        match self {
            Group::Odd => Group::Even,
            Group::Even => Group::Odd,
        }
    }

    fn of_index(j: usize) -> Self {
        if j % 2 == 1 {
            Group::Odd
        } else {
            Group::Even
        }
    }
}

/// Hermitian operator acting on 1 to 3 ascending sites.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTerm {
    sites: Vec<usize>,
    matrix: DenseOperator,
}

impl LocalTerm {
    pub fn new(sites: Vec<usize>, matrix: DenseOperator) -> Result<Self> {
        if sites.is_empty() || sites.len() > 3 || sites.windows(2).any(|w| w[0] >= w[1]) || sites[0] == 0 {
            return Err(Error::InvalidSites(sites));
        }
        let dim = 1usize << sites.len();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: matrix.nrows(),
            });
        }
        let defect = hermiticity_defect(&matrix);
        if defect > HERMITIAN_TOL * max_abs(&matrix).max(1.0) {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self { sites, matrix })
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn matrix(&self) -> &DenseOperator {
        &self.matrix
    }

    pub fn embed(&self, n_sites: usize) -> Result<DenseOperator> {
        kron_embed(&self.matrix, &self.sites, n_sites)
    }

    fn overlaps(&self, other: &LocalTerm) -> bool {
        self.sites.iter().any(|s| other.sites.contains(s))
    }
}

/// Model name and parameters. Serialized as a tagged table in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Heisenberg {
        h_x: f64,
    },
    Stark {
        j_x: f64,
        h_x: f64,
        h_y: f64,
        h_z: f64,
    },
    Pxp {},
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Heisenberg { .. } => "heisenberg",
            ModelSpec::Stark { .. } => "stark",
            ModelSpec::Pxp {} => "pxp",
        }
    }

    /// Predicted ladder frequency Ω.
    pub fn omega(&self) -> f64 {
        match *self {
            ModelSpec::Heisenberg { h_x } => h_x.abs(),
            ModelSpec::Stark { h_z, .. } => 2.0 * h_z.abs(),
            ModelSpec::Pxp {} => 1.0,
        }
    }

    /// Where the predicted ladder is exact.
    pub fn validity_note(&self) -> &'static str {
        match self {
            ModelSpec::Heisenberg { .. } => "within a total-spin multiplet",
            ModelSpec::Stark { .. } => "exact for the bare Stark potential; approximate in the strong-field regime",
            ModelSpec::Pxp {} => "within isolated-active-site invariant subspaces",
        }
    }

    /// Stroboscopic times `t_p = 2πp/Ω` for `p = 1..=count`; empty when Ω = 0.
    pub fn strobe_times(&self, count: usize) -> Vec<f64> {
        strobe_times(self.omega(), count)
    }

    pub fn build(&self, n_sites: usize) -> Result<SplitHamiltonian> {
        match *self {
            ModelSpec::Heisenberg { h_x } => build_heisenberg(n_sites, h_x),
            ModelSpec::Stark { j_x, h_x, h_y, h_z } => build_stark(n_sites, j_x, h_x, h_y, h_z),
            ModelSpec::Pxp {} => build_pxp(n_sites),
        }
    }
}

pub fn strobe_times(omega: f64, count: usize) -> Vec<f64> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Vec::new();
    }
    (1..=count)
        .map(|p| 2.0 * std::f64::consts::PI * p as f64 / omega)
        .collect()
}

/// Hamiltonian `H = H_o + H_e` with each group internally commuting.
#[derive(Debug, Clone)]
pub struct SplitHamiltonian {
    n_sites: usize,
    odd_terms: Vec<LocalTerm>,
    even_terms: Vec<LocalTerm>,
    model: ModelSpec,
}

impl SplitHamiltonian {
    /// Validates site ranges and intra-group commutativity.
    pub fn new(
        n_sites: usize,
        odd_terms: Vec<LocalTerm>,
        even_terms: Vec<LocalTerm>,
        model: ModelSpec,
    ) -> Result<Self> {
        if n_sites == 0 || n_sites > 24 {
            return Err(Error::InvalidParameter(format!("unsupported chain length {n_sites}")));
        }
        for term in odd_terms.iter().chain(even_terms.iter()) {
            linalg::validate_sites(term.sites(), n_sites)?;
        }
        check_commuting(&odd_terms)?;
        check_commuting(&even_terms)?;
        Ok(Self {
            n_sites,
            odd_terms,
            even_terms,
            model,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_sites
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn odd_terms(&self) -> &[LocalTerm] {
        &self.odd_terms
    }

    pub fn even_terms(&self) -> &[LocalTerm] {
        &self.even_terms
    }

    pub fn terms(&self, group: Group) -> &[LocalTerm] {
        match group {
            Group::Odd => &self.odd_terms,
            Group::Even => &self.even_terms,
        }
    }

    pub fn group_dense(&self, group: Group) -> DenseOperator {
        let dim = self.dim();
        let mut acc = DenseOperator::from_element(dim, dim, C64::new(0.0, 0.0));
        for term in self.terms(group) {
            // sites were validated on construction
            acc += term.embed(self.n_sites).expect("validated term");
        }
        acc
    }

    pub fn odd_dense(&self) -> DenseOperator {
        self.group_dense(Group::Odd)
    }

    pub fn even_dense(&self) -> DenseOperator {
        self.group_dense(Group::Even)
    }

    /// Assembled `H = Σ odd + Σ even`.
    pub fn dense(&self) -> DenseOperator {
        self.odd_dense() + self.even_dense()
    }
}

fn check_commuting(terms: &[LocalTerm]) -> Result<()> {
    for (i, a) in terms.iter().enumerate() {
        for b in &terms[i + 1..] {
            if !a.overlaps(b) {
                continue;
            }
            let mut union: Vec<usize> = a.sites.iter().chain(b.sites.iter()).copied().collect();
            union.sort_unstable();
            union.dedup();
            let relabel = |t: &LocalTerm| -> Vec<usize> {
                t.sites
                    .iter()
                    .map(|s| union.iter().position(|u| u == s).unwrap() + 1)
                    .collect()
            };
            let ea = kron_embed(&a.matrix, &relabel(a), union.len())?;
            let eb = kron_embed(&b.matrix, &relabel(b), union.len())?;
            let comm = max_abs(&linalg::commutator(&ea, &eb));
            let scale = (max_abs(&ea) * max_abs(&eb)).max(1.0);
            if comm > 1e-12 * scale {
                return Err(Error::InvalidParameter(format!(
                    "terms on sites {:?} and {:?} in the same group do not commute (|[A,B]| = {comm:e})",
                    a.sites, b.sites
                )));
            }
        }
    }
    Ok(())
}

/// Weight of a site's field carried by a bond at `left` site: full at chain ends.
fn field_weights(bond_left: usize, n_sites: usize) -> (f64, f64) {
    let wl = if bond_left == 1 { 1.0 } else { 0.5 };
    let wr = if bond_left + 1 == n_sites { 1.0 } else { 0.5 };
    (wl, wr)
}

fn bond_with_fields(
    coupling: &DenseOperator,
    left_field: &DenseOperator,
    right_field: &DenseOperator,
    bond_left: usize,
    n_sites: usize,
) -> DenseOperator {
    let (wl, wr) = field_weights(bond_left, n_sites);
    let id = identity(2);
    coupling + kron(left_field, &id).scale(wl) + kron(&id, right_field).scale(wr)
}

fn split_bonds(n_sites: usize, bond: impl Fn(usize) -> DenseOperator) -> Result<(Vec<LocalTerm>, Vec<LocalTerm>)> {
    let mut odd = Vec::new();
    let mut even = Vec::new();
    for j in 1..n_sites {
        let term = LocalTerm::new(vec![j, j + 1], bond(j))?;
        match Group::of_index(j) {
            Group::Odd => odd.push(term),
            Group::Even => even.push(term),
        }
    }
    Ok((odd, even))
}

/// Isotropic spin-1/2 Heisenberg chain (unit coupling, `S = σ/2`) in a
/// uniform transverse field `h_x Σ_j S_j^x`, open boundaries.
pub fn build_heisenberg(n_sites: usize, h_x: f64) -> Result<SplitHamiltonian> {
    if n_sites < 2 {
        return Err(Error::InvalidParameter(format!(
            "Heisenberg chain needs at least 2 sites, got {n_sites}"
        )));
    }
    let (x, y, z) = (pauli_x(), pauli_y(), pauli_z());
    let exchange = (kron(&x, &x) + kron(&y, &y) + kron(&z, &z)).scale(0.25);
    let field = x.scale(0.5 * h_x);
    let (odd, even) = split_bonds(n_sites, |j| bond_with_fields(&exchange, &field, &field, j, n_sites))?;
    SplitHamiltonian::new(n_sites, odd, even, ModelSpec::Heisenberg { h_x })
}

/// Ising chain `J_x Σ σ^x σ^x` with uniform `h_x, h_y` fields and a linear
/// Stark potential `j·h_z σ_j^z`, open boundaries.
pub fn build_stark(n_sites: usize, j_x: f64, h_x: f64, h_y: f64, h_z: f64) -> Result<SplitHamiltonian> {
    if n_sites < 2 {
        return Err(Error::InvalidParameter(format!(
            "Stark chain needs at least 2 sites, got {n_sites}"
        )));
    }
    let (x, y, z) = (pauli_x(), pauli_y(), pauli_z());
    let coupling = kron(&x, &x).scale(j_x);
    let field = |site: usize| x.scale(h_x) + y.scale(h_y) + z.scale(site as f64 * h_z);
    let (odd, even) = split_bonds(n_sites, |j| bond_with_fields(&coupling, &field(j), &field(j + 1), j, n_sites))?;
    SplitHamiltonian::new(n_sites, odd, even, ModelSpec::Stark { j_x, h_x, h_y, h_z })
}

/// Projector onto the down state `(I - σ^z)/2`.
pub fn down_projector() -> DenseOperator {
    (identity(2) - pauli_z()).scale(0.5)
}

/// `Σ_{j=2}^{L-1} P_{j-1} σ_j^x P_{j+1}`, terms grouped by the parity of `j`.
pub fn build_pxp(n_sites: usize) -> Result<SplitHamiltonian> {
    if n_sites < 3 {
        return Err(Error::InvalidParameter(format!(
            "PXP chain needs at least 3 sites, got {n_sites}"
        )));
    }
    let p = down_projector();
    let local = kron(&kron(&p, &pauli_x()), &p);
    let mut odd = Vec::new();
    let mut even = Vec::new();
    for j in 2..n_sites {
        let term = LocalTerm::new(vec![j - 1, j, j + 1], local.clone())?;
        match Group::of_index(j) {
            Group::Odd => odd.push(term),
            Group::Even => even.push(term),
        }
    }
    SplitHamiltonian::new(n_sites, odd, even, ModelSpec::Pxp {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigendecompose_hermitian, DenseOperator};

    /// Full-chain operator from a per-site list, built by chained Kronecker
    /// products (independent of `kron_embed`).
    fn chain_product(ops: &[DenseOperator]) -> DenseOperator {
        ops.iter().skip(1).fold(ops[0].clone(), |acc, o| kron(&acc, o))
    }

    fn site_op(op: &DenseOperator, site: usize, l: usize) -> DenseOperator {
        let ops: Vec<DenseOperator> = (1..=l).map(|s| if s == site { op.clone() } else { identity(2) }).collect();
        chain_product(&ops)
    }

    fn pair_op(a: &DenseOperator, sa: usize, b: &DenseOperator, sb: usize, l: usize) -> DenseOperator {
        site_op(a, sa, l) * site_op(b, sb, l)
    }

    fn heisenberg_oracle(l: usize, h_x: f64) -> DenseOperator {
        let (x, y, z) = (pauli_x().scale(0.5), pauli_y().scale(0.5), pauli_z().scale(0.5));
        let dim = 1 << l;
        let mut h = DenseOperator::zeros(dim, dim);
        for j in 1..l {
            h += pair_op(&x, j, &x, j + 1, l) + pair_op(&y, j, &y, j + 1, l) + pair_op(&z, j, &z, j + 1, l);
        }
        for j in 1..=l {
            h += site_op(&x, j, l).scale(h_x);
        }
        h
    }

    fn stark_oracle(l: usize, j_x: f64, h_x: f64, h_y: f64, h_z: f64) -> DenseOperator {
        let dim = 1 << l;
        let mut h = DenseOperator::zeros(dim, dim);
        for j in 1..l {
            h += pair_op(&pauli_x(), j, &pauli_x(), j + 1, l).scale(j_x);
        }
        for j in 1..=l {
            h += site_op(&pauli_x(), j, l).scale(h_x)
                + site_op(&pauli_y(), j, l).scale(h_y)
                + site_op(&pauli_z(), j, l).scale(j as f64 * h_z);
        }
        h
    }

    fn pxp_oracle(l: usize) -> DenseOperator {
        let p = down_projector();
        let dim = 1 << l;
        let mut h = DenseOperator::zeros(dim, dim);
        for j in 2..l {
            h += site_op(&p, j - 1, l) * site_op(&pauli_x(), j, l) * site_op(&p, j + 1, l);
        }
        h
    }

    #[test]
    fn heisenberg_two_sites_singlet_triplet() {
        let ham = build_heisenberg(2, 0.0).unwrap();
        assert_eq!(ham.odd_terms().len(), 1);
        assert!(ham.even_terms().is_empty());
        let spec = eigendecompose_hermitian(&ham.dense()).unwrap();
        for (e, want) in spec.energies().iter().zip([-0.75, 0.25, 0.25, 0.25]) {
            assert!((e - want).abs() < 1e-12);
        }
    }

    #[test]
    fn heisenberg_matches_dense_oracle() {
        let ham = build_heisenberg(4, 0.5).unwrap();
        assert!(max_abs(&(ham.dense() - heisenberg_oracle(4, 0.5))) < 1e-14);
    }

    #[test]
    fn heisenberg_ladder_at_twelve_sites() {
        let spec = ModelSpec::Heisenberg { h_x: 0.5 };
        assert_eq!(spec.omega(), 0.5);
        assert!((spec.strobe_times(1)[0] - 12.566).abs() < 1e-3);
    }

    #[test]
    fn stark_bare_potential_is_diagonal_with_even_gaps() {
        let ham = build_stark(3, 0.0, 0.0, 0.0, 1.0).unwrap();
        let h = ham.dense();
        for i in 0..8 {
            for j in 0..8 {
                if i != j {
                    assert_eq!(h[(i, j)].norm(), 0.0);
                }
            }
            // bit 0 is spin up (s = +1)
            let energy: f64 = (1..=3)
                .map(|site| {
                    let bit = (i >> (3 - site)) & 1;
                    site as f64 * if bit == 0 { 1.0 } else { -1.0 }
                })
                .sum();
            assert!((h[(i, i)].re - energy).abs() < 1e-14);
        }
        for i in 0..8 {
            for j in 0..8 {
                let gap = (h[(i, i)].re - h[(j, j)].re) / 2.0;
                assert!((gap - gap.round()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stark_figure_parameters() {
        let spec = ModelSpec::Stark { j_x: 1.0, h_x: 0.8, h_y: 0.9, h_z: 4.0 };
        assert_eq!(spec.omega(), 8.0);
        assert!((spec.strobe_times(1)[0] - std::f64::consts::PI / 4.0).abs() < 1e-14);
    }

    #[test]
    fn stark_matches_dense_oracle() {
        let ham = build_stark(4, 1.0, 0.8, 0.9, 4.0).unwrap();
        assert!(max_abs(&(ham.dense() - stark_oracle(4, 1.0, 0.8, 0.9, 4.0))) < 1e-14);
    }

    #[test]
    fn pxp_three_sites_single_term() {
        let ham = build_pxp(3).unwrap();
        assert_eq!(ham.odd_terms().len() + ham.even_terms().len(), 1);
        let spec = eigendecompose_hermitian(&ham.dense()).unwrap();
        for e in spec.energies() {
            assert!([-1.0, 0.0, 1.0].iter().any(|v| (e - v).abs() < 1e-12));
        }
    }

    #[test]
    fn pxp_neighbouring_terms_do_not_commute() {
        let ham = build_pxp(4).unwrap();
        let t2 = ham.even_terms()[0].embed(4).unwrap();
        let t3 = ham.odd_terms()[0].embed(4).unwrap();
        for t in [&t2, &t3] {
            let spec = eigendecompose_hermitian(t).unwrap();
            for e in spec.energies() {
                assert!([-1.0, 0.0, 1.0].iter().any(|v| (e - v).abs() < 1e-12));
            }
        }
        assert!(max_abs(&linalg::commutator(&t2, &t3)) > 0.1);
        assert_eq!(ModelSpec::Pxp {}.omega(), 1.0);
    }

    #[test]
    fn all_models_match_oracles_up_to_eight_sites() {
        for l in 3..=8 {
            let h = build_heisenberg(l, 0.37).unwrap().dense();
            assert!(max_abs(&(h - heisenberg_oracle(l, 0.37))) < 1e-13);
            let h = build_stark(l, 0.7, -0.3, 0.45, 1.3).unwrap().dense();
            assert!(max_abs(&(h - stark_oracle(l, 0.7, -0.3, 0.45, 1.3))) < 1e-13);
            let h = build_pxp(l).unwrap().dense();
            assert!(max_abs(&(h - pxp_oracle(l))) < 1e-13);
        }
    }

    #[test]
    fn groups_commute_internally_on_full_space() {
        for ham in [
            build_heisenberg(6, 0.5).unwrap(),
            build_stark(6, 1.0, 0.8, 0.9, 4.0).unwrap(),
            build_pxp(7).unwrap(),
        ] {
            for group in [Group::Odd, Group::Even] {
                let terms: Vec<_> = ham.terms(group).iter().map(|t| t.embed(ham.n_sites()).unwrap()).collect();
                for a in &terms {
                    for b in &terms {
                        assert!(max_abs(&linalg::commutator(a, b)) < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn heisenberg_multiplets_form_equidistant_ladders() {
        use crate::analysis::total_spin_operator;
        for l in 2..=6 {
            let h_x = 0.5;
            let h_iso = heisenberg_oracle(l, 0.0);
            let h = heisenberg_oracle(l, h_x);
            let s2 = total_spin_operator(l);
            // clusters of H_iso + c·S^2 are unions of multiplets sharing S and E(S)
            let sectors = eigendecompose_hermitian(&(&h_iso + s2.scale(std::f64::consts::PI))).unwrap();
            for cluster in sectors.degenerate_clusters(1e-8) {
                let v = sectors.basis().columns(cluster.start, cluster.len()).into_owned();
                let s2v = (v.adjoint() * &s2 * &v)[(0, 0)].re;
                let s = (-1.0 + (1.0 + 4.0 * s2v).sqrt()) / 2.0;
                let mult = (2.0 * s + 1.0).round() as usize;
                assert_eq!(cluster.len() % mult, 0);
                let restricted = v.adjoint() * &h * &v;
                let levels = eigendecompose_hermitian(&restricted).unwrap();
                let mut distinct: Vec<f64> = Vec::new();
                for &e in levels.energies() {
                    if distinct.last().map_or(true, |&d| e - d > 1e-8) {
                        distinct.push(e);
                    }
                }
                assert_eq!(distinct.len(), mult, "L={l}, S={s}");
                for w in distinct.windows(2) {
                    assert!((w[1] - w[0] - h_x).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn rejects_short_chains() {
        assert!(build_heisenberg(1, 0.1).is_err());
        assert!(build_stark(1, 1.0, 0.0, 0.0, 1.0).is_err());
        assert!(build_pxp(2).is_err());
    }

    #[test]
    fn model_spec_serializes_with_tag() {
        let spec = ModelSpec::Stark { j_x: 1.0, h_x: 0.8, h_y: 0.9, h_z: 4.0 };
        let text = toml::to_string(&spec).unwrap();
        assert!(text.contains("name = \"stark\""));
        let back: ModelSpec = toml::from_str(&text).unwrap();
        assert_eq!(back, spec);
        assert!(toml::from_str::<ModelSpec>("name = \"pxp\"\nextra = 1").is_err());
    }

    #[test]
    fn non_commuting_group_is_rejected() {
        let x = LocalTerm::new(vec![1], pauli_x()).unwrap();
        let z = LocalTerm::new(vec![1], pauli_z()).unwrap();
        assert!(SplitHamiltonian::new(2, vec![x, z], vec![], ModelSpec::Pxp {}).is_err());
    }
}
