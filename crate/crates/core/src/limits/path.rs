use crate::limits::grid::GridCoefficients;
use crate::limits::spec::ItoSpec;
use crate::limits::LimitsError;
use crate::numerics::rng::{gaussian_matrix, gaussian_vector, RngStream};
use crate::numerics::tensor::{Mat, Tensor, Vector};
use crate::scalar::Scalar;

/// Brownian increments on a uniform grid of `L` steps and the weight
/// increments they drive.
#[derive(Clone, Debug, PartialEq)]
pub struct DrivingPath<T> {
    pub depth: usize,
    /// `ΔB^A_k`, entries `N(0, 1/L)`.
    pub db_a: Vec<Mat<T>>,
    /// `ΔB^b_k`, entries `N(0, 1/L)`.
    pub db_b: Vec<Vector<T>>,
    /// `ΔW^A_k = W^A_{(k+1)/L} - W^A_{k/L}`.
    pub dw_a: Vec<Mat<T>>,
    pub dw_b: Vec<Vector<T>>,
}

impl<T: Scalar> DrivingPath<T> {
    /// Weight increments from given Brownian increments:
    /// `ΔW^A_k = U^A(t_k)/L + q^A(t_k) : ΔB^A_k`, `ΔW^b_k = U^b(t_k)/L + q^b(t_k) ΔB^b_k`.
    pub fn from_brownian(
        spec: &ItoSpec<T>,
        db_a: Vec<Mat<T>>,
        db_b: Vec<Vector<T>>,
    ) -> Result<Self, LimitsError> {
        let grid = GridCoefficients::sample(spec, db_a.len().max(1))?;
        Self::from_brownian_on(&grid, db_a, db_b)
    }

    pub(crate) fn from_brownian_on(
        grid: &GridCoefficients<T>,
        db_a: Vec<Mat<T>>,
        db_b: Vec<Vector<T>>,
    ) -> Result<Self, LimitsError> {
        let depth = db_a.len();
        let d = grid.d;
        if depth != grid.depth
            || db_b.len() != depth
            || db_a.iter().any(|m| m.shape() != (d, d))
            || db_b.iter().any(|v| v.dim() != d)
        {
            return Err(LimitsError::DimensionMismatch(format!(
                "Brownian increments do not match d = {d}"
            )));
        }
        let inv_l = T::one() / T::from_usize_lossy(depth);
        let mut dw_a = Vec::with_capacity(depth);
        let mut dw_b = Vec::with_capacity(depth);
        for k in 0..depth {
            let mut wa = grid.q_a.at(k).contract(&db_a[k]);
            wa.axpy(inv_l, grid.u_a.at(k));
            let mut wb = grid.q_b.at(k).matvec(&db_b[k]);
            wb.axpy(inv_l, grid.u_b.at(k));
            dw_a.push(wa);
            dw_b.push(wb);
        }
        Ok(Self {
            depth,
            db_a,
            db_b,
            dw_a,
            dw_b,
        })
    }

    /// Sums consecutive blocks of `factor` increments, giving the same
    /// Brownian and weight paths observed on a grid of `L / factor` steps.
    pub fn aggregate(&self, factor: usize) -> Result<Self, LimitsError> {
        if factor == 0 || !self.depth.is_multiple_of(factor) {
            return Err(LimitsError::InvalidParameter(format!(
                "cannot aggregate {} steps in blocks of {factor}",
                self.depth
            )));
        }
        fn blocks<S: Tensor<T>, T: Scalar>(xs: &[S], factor: usize) -> Vec<S> {
            xs.chunks(factor)
                .map(|c| {
                    let mut acc = c[0].clone();
                    for x in &c[1..] {
                        acc.axpy(T::one(), x);
                    }
                    acc
                })
                .collect()
        }
        Ok(Self {
            depth: self.depth / factor,
            db_a: blocks(&self.db_a, factor),
            db_b: blocks(&self.db_b, factor),
            dw_a: blocks(&self.dw_a, factor),
            dw_b: blocks(&self.dw_b, factor),
        })
    }

    /// `W^A_1`.
    pub fn w_a_end(&self) -> Mat<T> {
        let mut s = self.dw_a[0].zeros_like();
        for m in &self.dw_a {
            s.axpy(T::one(), m);
        }
        s
    }

    /// `W^b_1`.
    pub fn w_b_end(&self) -> Vector<T> {
        let mut s = self.dw_b[0].zeros_like();
        for v in &self.dw_b {
            s.axpy(T::one(), v);
        }
        s
    }
}

/// Draws `ΔB^A_k`, `ΔB^b_k` (in that order per step) and builds the path.
pub fn sample_driving_path<T: Scalar>(
    spec: &ItoSpec<T>,
    depth: usize,
    rng: &mut RngStream,
) -> Result<DrivingPath<T>, LimitsError> {
    sample_driving_path_on(&GridCoefficients::sample(spec, depth)?, rng)
}

pub(crate) fn sample_driving_path_on<T: Scalar>(
    grid: &GridCoefficients<T>,
    rng: &mut RngStream,
) -> Result<DrivingPath<T>, LimitsError> {
    let (depth, d) = (grid.depth, grid.d);
    let std = T::one() / T::from_usize_lossy(depth).sqrt();
    let mut db_a = Vec::with_capacity(depth);
    let mut db_b = Vec::with_capacity(depth);
    for _ in 0..depth {
        db_a.push(gaussian_matrix(rng, d, d, std));
        db_b.push(gaussian_vector(rng, d, std));
    }
    DrivingPath::from_brownian_on(grid, db_a, db_b)
}
