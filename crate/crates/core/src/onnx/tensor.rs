//! Dense row-major tensors and the shape-level operations shared by the
//! float32 executor and the interval propagator.

/// Row-major tensor. `shape.iter().product() == data.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Row-major strides for `shape`.
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

impl<T: Copy> Tensor<T> {
    /// Panics if the element count does not match the shape.
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Self {
        assert_eq!(numel(&shape), data.len(), "shape {shape:?} does not match {} elements", data.len());
        Tensor { shape, data }
    }

    pub fn from_vec(data: Vec<T>) -> Self {
        Tensor { shape: vec![data.len()], data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Tensor<U> {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn reshaped(&self, shape: Vec<usize>) -> Tensor<T> {
        debug_assert_eq!(numel(&shape), self.data.len());
        Tensor { shape, data: self.data.clone() }
    }

    pub fn transpose(&self, perm: &[usize]) -> Tensor<T> {
        let out_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let in_strides = strides(&self.shape);
        let n = self.data.len();
        let mut out = Vec::with_capacity(n);
        let mut idx = vec![0usize; out_shape.len()];
        for _ in 0..n {
            let offset: usize = idx.iter().zip(perm).map(|(&i, &p)| i * in_strides[p]).sum();
            out.push(self.data[offset]);
            for d in (0..idx.len()).rev() {
                idx[d] += 1;
                if idx[d] < out_shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        Tensor { shape: out_shape, data: out }
    }

    pub fn slice(&self, axes: &[SliceAxis]) -> Tensor<T> {
        let out_shape: Vec<usize> = axes.iter().map(|a| a.count).collect();
        let in_strides = strides(&self.shape);
        let n = numel(&out_shape);
        let mut out = Vec::with_capacity(n);
        let mut idx = vec![0usize; out_shape.len()];
        for _ in 0..n {
            let offset: usize = idx
                .iter()
                .zip(axes)
                .zip(&in_strides)
                .map(|((&i, a), &s)| (a.start + a.step * i as i64) as usize * s)
                .sum();
            out.push(self.data[offset]);
            for d in (0..idx.len()).rev() {
                idx[d] += 1;
                if idx[d] < out_shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        Tensor { shape: out_shape, data: out }
    }

    pub fn concat(parts: &[&Tensor<T>], axis: usize) -> Tensor<T> {
        let mut out_shape = parts[0].shape.clone();
        out_shape[axis] = parts.iter().map(|p| p.shape[axis]).sum();
        let outer: usize = out_shape[..axis].iter().product();
        let mut data = Vec::with_capacity(numel(&out_shape));
        for o in 0..outer {
            for p in parts {
                let chunk: usize = p.shape[axis..].iter().product();
                data.extend_from_slice(&p.data[o * chunk..(o + 1) * chunk]);
            }
        }
        Tensor { shape: out_shape, data }
    }
}

/// Resolved slice along one dimension: indices `start + step * i` for
/// `i in 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SliceAxis {
    pub start: i64,
    pub step: i64,
    pub count: usize,
}

impl SliceAxis {
    pub fn full(dim: usize) -> Self {
        SliceAxis { start: 0, step: 1, count: dim }
    }

    /// ONNX `Slice` clamping rules for one axis of length `dim`.
    pub fn resolve(dim: usize, start: i64, end: i64, step: i64) -> Option<Self> {
        if step == 0 {
            return None;
        }
        let d = dim as i64;
        let norm = |v: i64| if v < 0 { v.saturating_add(d) } else { v };
        let (start, end) = if step > 0 {
            (norm(start).clamp(0, d), norm(end).clamp(0, d))
        } else {
            (norm(start).clamp(0, d - 1), norm(end).clamp(-1, d - 1))
        };
        let span = end - start;
        let count = if (step > 0 && span > 0) || (step < 0 && span < 0) {
            ((span.abs() + step.abs() - 1) / step.abs()) as usize
        } else {
            0
        };
        Some(SliceAxis { start, step, count })
    }
}

/// Numpy-style broadcast of two shapes.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i < rank - a.len() { 1 } else { a[i - (rank - a.len())] };
        let db = if i < rank - b.len() { 1 } else { b[i - (rank - b.len())] };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// For each element of `out_shape`, the flat index into a tensor of
/// `in_shape` broadcast to it.
pub fn broadcast_index_map(in_shape: &[usize], out_shape: &[usize]) -> Vec<usize> {
    let n = numel(out_shape);
    if in_shape == out_shape {
        return (0..n).collect();
    }
    let rank = out_shape.len();
    let offset = rank - in_shape.len();
    let in_strides = strides(in_shape);
    let mut map = Vec::with_capacity(n);
    let mut idx = vec![0usize; rank];
    for _ in 0..n {
        let mut flat = 0;
        for (d, &i) in idx.iter().enumerate().skip(offset) {
            let k = d - offset;
            if in_shape[k] != 1 {
                flat += i * in_strides[k];
            }
        }
        map.push(flat);
        for d in (0..rank).rev() {
            idx[d] += 1;
            if idx[d] < out_shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    map
}

/// Element-wise binary operation with broadcasting. The caller has checked
/// that the shapes broadcast.
pub fn broadcast_binary<A: Copy, B: Copy, C: Copy>(a: &Tensor<A>, b: &Tensor<B>, f: impl Fn(A, B) -> C) -> Tensor<C> {
    let shape = broadcast_shape(&a.shape, &b.shape).expect("shapes broadcast");
    if a.shape == b.shape {
        let data = a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect();
        return Tensor { shape, data };
    }
    let ia = broadcast_index_map(&a.shape, &shape);
    let ib = broadcast_index_map(&b.shape, &shape);
    let data = ia.iter().zip(&ib).map(|(&i, &j)| f(a.data[i], b.data[j])).collect();
    Tensor { shape, data }
}
