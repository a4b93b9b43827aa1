use super::GridCase;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// DC power-flow matrices of a grid, all in per-unit.
///
/// Row `l` of the incidence matrix has `+1` at the branch's from-bus and `-1`
/// at its to-bus. The admittance matrix is `B = AᵀDA` with `D = diag(1/x)`
/// and line flows are `H·θ` with `H = DA`.
#[derive(Clone, Debug)]
pub struct DcModel<T> {
    pub incidence: Matrix<T>,
    pub susceptance: Vec<T>,
    pub admittance: Matrix<T>,
    pub flow_matrix: Matrix<T>,
    pub ref_bus: usize,
}

impl<T: Scalar> DcModel<T> {
    pub fn n_buses(&self) -> usize {
        self.admittance.rows()
    }

    pub fn n_lines(&self) -> usize {
        self.incidence.rows()
    }

    /// `D` as a dense diagonal matrix.
    pub fn susceptance_diag(&self) -> Matrix<T> {
        Matrix::from_diag(&self.susceptance)
    }

    /// Per-unit line flows `H·θ`.
    pub fn flows(&self, theta: &[T]) -> Vec<T> {
        self.flow_matrix.matvec(theta)
    }
}

/// Builds the DC model with the first bus as angle reference.
pub fn build_dc_model<T: Scalar>(case: &GridCase) -> DcModel<T> {
    assemble(case, 0)
}

pub fn build_dc_model_with_ref<T: Scalar>(case: &GridCase, ref_bus: usize) -> Result<DcModel<T>> {
    if ref_bus >= case.n_buses() {
        return Err(Error::InvalidArgument(format!(
            "reference bus index {ref_bus} out of range for {} buses",
            case.n_buses()
        )));
    }
    Ok(assemble(case, ref_bus))
}

fn assemble<T: Scalar>(case: &GridCase, ref_bus: usize) -> DcModel<T> {
    let m = case.n_buses();
    let l = case.n_branches();
    let mut incidence = Matrix::zeros(l, m);
    let mut flow_matrix = Matrix::zeros(l, m);
    let mut admittance = Matrix::zeros(m, m);
    let mut susceptance = Vec::with_capacity(l);

    for (k, br) in case.branches.iter().enumerate() {
        let b = T::one() / T::lit(br.reactance);
        let (f, t) = (br.from_bus, br.to_bus);
        susceptance.push(b);
        incidence[(k, f)] = T::one();
        incidence[(k, t)] = -T::one();
        flow_matrix[(k, f)] = b;
        flow_matrix[(k, t)] = -b;
        // each line adds b·(e_f − e_t)(e_f − e_t)ᵀ
        admittance[(f, f)] += b;
        admittance[(t, t)] += b;
        admittance[(f, t)] -= b;
        admittance[(t, f)] -= b;
    }

    DcModel {
        incidence,
        susceptance,
        admittance,
        flow_matrix,
        ref_bus,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::parse_case;

    #[test]
    fn two_bus_matrices() {
        let text = crate::grid::tests::TWO_BUS.replace("reactance = 0.1", "reactance = 0.5");
        let case = parse_case(&text).unwrap();
        let dc: DcModel<f64> = build_dc_model(&case);
        assert_eq!(dc.admittance.to_rows(), vec![vec![2.0, -2.0], vec![-2.0, 2.0]]);
        assert_eq!(dc.flow_matrix.to_rows(), vec![vec![2.0, -2.0]]);
        assert_eq!(dc.ref_bus, 0);
    }

    #[test]
    fn reference_override() {
        let case = parse_case(crate::grid::tests::TWO_BUS).unwrap();
        assert_eq!(build_dc_model_with_ref::<f64>(&case, 1).unwrap().ref_bus, 1);
        assert!(build_dc_model_with_ref::<f64>(&case, 2).is_err());
    }
}
