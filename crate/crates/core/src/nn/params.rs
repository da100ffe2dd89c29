use crate::error::{Error, Result};

/// A named collection of f64 tensors. Gradients are stored in the same
/// type as the parameters they belong to.
pub trait ParamSet {
    /// Calls `f(name, shape, data)` for every tensor, in a fixed order.
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64]));
}

/// Implements [`ParamSet`] for a struct whose listed fields are ndarray
/// arrays in standard layout.
macro_rules! array_param_set {
    ($ty:ty { $($field:tt),* $(,)? }) => {
        impl $crate::nn::ParamSet for $ty {
            fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
                $(
                    f(stringify!($field), self.$field.shape(), self.$field.as_slice().expect("standard layout"));
                )*
            }
            fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
                $(
                    f(stringify!($field), self.$field.as_slice_mut().expect("standard layout"));
                )*
            }
        }
    };
}
pub(crate) use array_param_set;

/// Forwards `visit` to a component, prefixing tensor names with `prefix.`.
pub fn visit_prefixed<P: ParamSet + ?Sized>(prefix: &str, p: &P, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
    p.visit(&mut |name, shape, data| f(&format!("{prefix}.{name}"), shape, data));
}

pub fn visit_mut_prefixed<P: ParamSet + ?Sized>(prefix: &str, p: &mut P, f: &mut dyn FnMut(&str, &mut [f64])) {
    p.visit_mut(&mut |name, data| f(&format!("{prefix}.{name}"), data));
}

pub fn param_count<P: ParamSet + ?Sized>(p: &P) -> usize {
    let mut n = 0;
    p.visit(&mut |_, _, d| n += d.len());
    n
}

pub fn flatten<P: ParamSet + ?Sized>(p: &P) -> Vec<f64> {
    let mut out = Vec::with_capacity(param_count(p));
    p.visit(&mut |_, _, d| out.extend_from_slice(d));
    out
}

/// Overwrites every value of `p` from `flat`, which must match in length.
pub fn assign_flat<P: ParamSet + ?Sized>(p: &mut P, flat: &[f64]) -> Result<()> {
    let n = param_count(p);
    if n != flat.len() {
        return Err(Error::shape("parameter vector", n, flat.len()));
    }
    let mut offset = 0;
    p.visit_mut(&mut |_, d| {
        d.copy_from_slice(&flat[offset..offset + d.len()]);
        offset += d.len();
    });
    Ok(())
}

pub fn fill<P: ParamSet + ?Sized>(p: &mut P, value: f64) {
    p.visit_mut(&mut |_, d| d.iter_mut().for_each(|v| *v = value));
}

pub fn zeros_like<P: ParamSet + Clone>(p: &P) -> P {
    let mut z = p.clone();
    fill(&mut z, 0.0);
    z
}

pub fn global_norm<P: ParamSet + ?Sized>(p: &P) -> f64 {
    let mut sq = 0.0;
    p.visit(&mut |_, _, d| sq += d.iter().map(|v| v * v).sum::<f64>());
    sq.sqrt()
}

pub fn scale<P: ParamSet + ?Sized>(p: &mut P, factor: f64) {
    p.visit_mut(&mut |_, d| d.iter_mut().for_each(|v| *v *= factor));
}

/// `acc += other`, element-wise.
pub fn accumulate<P: ParamSet + ?Sized>(acc: &mut P, other: &P) -> Result<()> {
    let flat = flatten(other);
    if flat.len() != param_count(acc) {
        return Err(Error::shape("gradient accumulator", param_count(acc), flat.len()));
    }
    let mut offset = 0;
    acc.visit_mut(&mut |_, d| {
        for v in d.iter_mut() {
            *v += flat[offset];
            offset += 1;
        }
    });
    Ok(())
}

pub fn all_finite<P: ParamSet + ?Sized>(p: &P) -> bool {
    let mut ok = true;
    p.visit(&mut |_, _, d| ok &= d.iter().all(|v| v.is_finite()));
    ok
}
