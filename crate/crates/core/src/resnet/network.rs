//! Parameters, forward pass, loss and exact gradients of
//! `h_{k+1} = h_k + δ_k σ(A_k h_k + b_k)`.

use crate::numerics::rng::{gaussian_matrix, gaussian_vector, RngStream};
use crate::numerics::tensor::{Mat, Tensor, Vector};
use crate::resnet::arch::{Architecture, DeltaMode};
use crate::resnet::ResNetError;
use crate::scalar::Scalar;

const STREAM_INIT: u64 = 0x494e_4954;

/// Residual scale: one shared scalar or one value per layer.
#[derive(Clone, Debug, PartialEq)]
pub enum Delta<T> {
    Shared(T),
    PerLayer(Vec<T>),
}

impl<T: Scalar> Delta<T> {
    #[inline]
    pub fn at(&self, k: usize) -> T {
        match self {
            Delta::Shared(v) => *v,
            Delta::PerLayer(v) => v[k],
        }
    }

    pub fn as_slice(&self) -> &[T] {
        match self {
            Delta::Shared(v) => std::slice::from_ref(v),
            Delta::PerLayer(v) => v,
        }
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        match self {
            Delta::Shared(v) => std::slice::from_mut(v),
            Delta::PerLayer(v) => v,
        }
    }

    /// Per-layer values, expanding a shared scale to `depth` copies.
    pub fn per_layer(&self, depth: usize) -> Vec<T> {
        (0..depth).map(|k| self.at(k)).collect()
    }

    /// `max_k |δ_k|`.
    pub fn max_abs(&self) -> T {
        self.as_slice()
            .iter()
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResNet<T> {
    pub arch: Architecture,
    pub a: Vec<Mat<T>>,
    pub b: Vec<Vector<T>>,
    pub delta: Delta<T>,
}

/// Gradients of the minibatch loss, plus what the backward sweep observed.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub da: Vec<Mat<T>>,
    pub db: Vec<Vector<T>>,
    /// Same variant as the network's δ; a shared δ gets the sum over layers.
    pub ddelta: Delta<T>,
    pub loss: T,
    /// `max_k |h_k|` over the batch.
    pub max_hidden_norm: T,
}

impl<T: Scalar> Gradients<T> {
    /// Flattened in checkpoint order: all `A_k`, all `b_k`, then δ.
    pub fn to_flat(&self) -> Vec<T> {
        flatten(&self.da, &self.db, &self.delta_slice())
    }

    fn delta_slice(&self) -> Vec<T> {
        self.ddelta.as_slice().to_vec()
    }
}

fn flatten<T: Scalar>(a: &[Mat<T>], b: &[Vector<T>], delta: &[T]) -> Vec<T> {
    a.iter()
        .flat_map(|m| m.as_slice().iter().copied())
        .chain(b.iter().flat_map(|v| v.as_slice().iter().copied()))
        .chain(delta.iter().copied())
        .collect()
}

impl<T: Scalar> ResNet<T> {
    /// Gaussian initialization matching i.i.d. matrix Brownian increments:
    /// `A_k ~ N(0, 1/(L d^2))`, `b_k ~ N(0, 1/(L d))` entrywise. A shared δ
    /// starts at `L^{-1/2}`; per-layer δ_k are `N(0, 1/L)`.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self, ResNetError> {
        arch.validate()?;
        let (l, d) = (arch.depth, arch.width);
        let lf = T::from_usize_lossy(l);
        let df = T::from_usize_lossy(d);
        let mut rng = RngStream::derived(seed, &[STREAM_INIT]);
        let a_std = T::one() / (lf.sqrt() * df);
        let b_std = T::one() / (lf * df).sqrt();
        let a = (0..l)
            .map(|_| gaussian_matrix(&mut rng, d, d, a_std))
            .collect();
        let b = (0..l)
            .map(|_| gaussian_vector(&mut rng, d, b_std))
            .collect();
        let delta = match arch.delta_mode {
            DeltaMode::Shared => Delta::Shared(T::one() / lf.sqrt()),
            DeltaMode::PerLayer => {
                let std = T::one() / lf.sqrt();
                Delta::PerLayer((0..l).map(|_| rng.normal(std)).collect())
            }
        };
        Ok(Self { arch, a, b, delta })
    }

    /// Assembles a network from explicit parameters, checking every shape.
    pub fn from_parts(
        arch: Architecture,
        a: Vec<Mat<T>>,
        b: Vec<Vector<T>>,
        delta: Delta<T>,
    ) -> Result<Self, ResNetError> {
        arch.validate()?;
        let (l, d) = (arch.depth, arch.width);
        let delta_ok = match (&delta, arch.delta_mode) {
            (Delta::Shared(_), DeltaMode::Shared) => true,
            (Delta::PerLayer(v), DeltaMode::PerLayer) => v.len() == l,
            _ => false,
        };
        if a.len() != l
            || b.len() != l
            || !delta_ok
            || a.iter().any(|m| m.shape() != (d, d))
            || b.iter().any(|v| v.dim() != d)
        {
            return Err(ResNetError::DimensionMismatch(format!(
                "parameters do not match L={l}, d={d}, {}",
                arch.delta_mode
            )));
        }
        let net = Self { arch, a, b, delta };
        if !net.to_flat().iter().all(|v| v.is_finite()) {
            return Err(ResNetError::DimensionMismatch(
                "non-finite parameter".into(),
            ));
        }
        Ok(net)
    }

    pub fn depth(&self) -> usize {
        self.arch.depth
    }

    pub fn width(&self) -> usize {
        self.arch.width
    }

    pub fn to_flat(&self) -> Vec<T> {
        flatten(&self.a, &self.b, self.delta.as_slice())
    }

    /// Inverse of [`to_flat`](Self::to_flat).
    pub fn set_flat(&mut self, flat: &[T]) -> Result<(), ResNetError> {
        if flat.len() != self.arch.param_count() {
            return Err(ResNetError::DimensionMismatch(format!(
                "expected {} parameters, got {}",
                self.arch.param_count(),
                flat.len()
            )));
        }
        let mut it = flat.iter().copied();
        for m in &mut self.a {
            for v in m.as_mut_slice() {
                *v = it.next().expect("length checked");
            }
        }
        for bv in &mut self.b {
            for v in bv.as_mut_slice() {
                *v = it.next().expect("length checked");
            }
        }
        for v in self.delta.as_mut_slice() {
            *v = it.next().expect("length checked");
        }
        Ok(())
    }

    fn check_input(&self, x: &Vector<T>) -> Result<(), ResNetError> {
        if x.dim() != self.width() {
            return Err(ResNetError::DimensionMismatch(format!(
                "input has dimension {}, network width is {}",
                x.dim(),
                self.width()
            )));
        }
        Ok(())
    }

    /// Hidden states `h_0 = x, ..., h_L`.
    pub fn forward(&self, x: &Vector<T>) -> Result<Vec<Vector<T>>, ResNetError> {
        Ok(self.forward_trace(x)?.states)
    }

    /// Output `h_L` only.
    pub fn predict(&self, x: &Vector<T>) -> Result<Vector<T>, ResNetError> {
        self.check_input(x)?;
        let act = self.arch.activation;
        let mut h = x.clone();
        for k in 0..self.depth() {
            let mut z = self.a[k].matvec(&h);
            z.axpy(T::one(), &self.b[k]);
            let dk = self.delta.at(k);
            for (hi, &zi) in h.as_mut_slice().iter_mut().zip(z.as_slice()) {
                *hi = *hi + dk * act.apply(zi);
            }
            if !h.is_finite() {
                return Err(ResNetError::NonFiniteState { layer: k + 1 });
            }
        }
        Ok(h)
    }

    fn forward_trace(&self, x: &Vector<T>) -> Result<Trace<T>, ResNetError> {
        self.check_input(x)?;
        let act = self.arch.activation;
        let l = self.depth();
        let mut states = Vec::with_capacity(l + 1);
        let mut pre = Vec::with_capacity(l);
        states.push(x.clone());
        for k in 0..l {
            let h = &states[k];
            let mut z = self.a[k].matvec(h);
            z.axpy(T::one(), &self.b[k]);
            let dk = self.delta.at(k);
            let mut next = h.clone();
            for (hi, &zi) in next.as_mut_slice().iter_mut().zip(z.as_slice()) {
                *hi = *hi + dk * act.apply(zi);
            }
            if !next.is_finite() {
                return Err(ResNetError::NonFiniteState { layer: k + 1 });
            }
            pre.push(z);
            states.push(next);
        }
        Ok(Trace { states, pre })
    }

    /// Mean over the batch of the mean over coordinates of `(h_L - y)^2`.
    pub fn loss<'a, I>(&self, batch: I) -> Result<T, ResNetError>
    where
        I: IntoIterator<Item = (&'a Vector<T>, &'a Vector<T>)>,
    {
        let mut total = T::zero();
        let mut count = 0usize;
        for (x, y) in batch {
            let out = self.predict(x)?;
            total = total + sample_loss(&out, y)?;
            count += 1;
        }
        if count == 0 {
            return Err(ResNetError::EmptyBatch);
        }
        Ok(total / T::from_usize_lossy(count))
    }

    /// Exact gradients of [`loss`](Self::loss) by reverse-mode sweep.
    pub fn backward<'a, I>(&self, batch: I) -> Result<Gradients<T>, ResNetError>
    where
        I: IntoIterator<Item = (&'a Vector<T>, &'a Vector<T>)>,
    {
        let batch: Vec<_> = batch.into_iter().collect();
        if batch.is_empty() {
            return Err(ResNetError::EmptyBatch);
        }
        let (l, d) = (self.depth(), self.width());
        let act = self.arch.activation;
        let bf = T::from_usize_lossy(batch.len());
        let out_scale = T::lit(2.0) / (bf * T::from_usize_lossy(d));
        let mut da: Vec<Mat<T>> = (0..l).map(|_| Mat::zeros(d, d)).collect();
        let mut db: Vec<Vector<T>> = (0..l).map(|_| Vector::zeros(d)).collect();
        let mut ddelta = vec![T::zero(); l];
        let mut loss = T::zero();
        let mut max_hidden_norm = T::zero();

        for (x, y) in batch {
            let trace = self.forward_trace(x)?;
            let h_out = &trace.states[l];
            loss = loss + sample_loss(h_out, y)?;
            for h in &trace.states {
                max_hidden_norm = max_hidden_norm.max(h.norm());
            }
            // g = dLoss/dh_L
            let mut g = h_out.minus(y);
            g.scale_mut(out_scale);
            for k in (0..l).rev() {
                let z = &trace.pre[k];
                let dk = self.delta.at(k);
                let mut u = Vector::zeros(d);
                let mut dd = T::zero();
                for i in 0..d {
                    dd = dd + g[i] * act.apply(z[i]);
                    u[i] = dk * act.derivative(z[i]) * g[i];
                }
                ddelta[k] = ddelta[k] + dd;
                da[k].add_outer(T::one(), &u, &trace.states[k]);
                db[k].axpy(T::one(), &u);
                let back = self.a[k].tr_matvec(&u);
                g.axpy(T::one(), &back);
            }
        }
        let ddelta = match self.delta {
            Delta::Shared(_) => Delta::Shared(ddelta.iter().copied().sum()),
            Delta::PerLayer(_) => Delta::PerLayer(ddelta),
        };
        Ok(Gradients {
            da,
            db,
            ddelta,
            loss: loss / bf,
            max_hidden_norm,
        })
    }

    /// `θ <- θ - lr * grad` for every parameter.
    pub fn apply_update(&mut self, grads: &Gradients<T>, lr: T) {
        for (a, g) in self.a.iter_mut().zip(&grads.da) {
            a.axpy(-lr, g);
        }
        for (b, g) in self.b.iter_mut().zip(&grads.db) {
            b.axpy(-lr, g);
        }
        for (v, g) in self
            .delta
            .as_mut_slice()
            .iter_mut()
            .zip(grads.ddelta.as_slice())
        {
            *v = *v - lr * *g;
        }
    }
}

struct Trace<T> {
    states: Vec<Vector<T>>,
    pre: Vec<Vector<T>>,
}

fn sample_loss<T: Scalar>(out: &Vector<T>, y: &Vector<T>) -> Result<T, ResNetError> {
    if out.dim() != y.dim() {
        return Err(ResNetError::DimensionMismatch(format!(
            "target has dimension {}, output {}",
            y.dim(),
            out.dim()
        )));
    }
    Ok(out.minus(y).norm_sq() / T::from_usize_lossy(out.dim()))
}
