use std::cell::RefCell;
use std::fmt;

use crate::{Error, Result, C64};

// Freed array storage is kept per thread and handed back out to new arrays,
// so a training loop does not hand its buffers back to the OS every epoch.
const POOL_MIN_LEN: usize = 1 << 12;
const POOL_MAX_BUFFERS: usize = 64;

thread_local! {
    static POOL: RefCell<Vec<Vec<C64>>> = const { RefCell::new(Vec::new()) };
}

fn pooled_empty(n: usize) -> Vec<C64> {
    if n < POOL_MIN_LEN {
        return Vec::with_capacity(n);
    }
    POOL.with(|p| {
        let mut p = p.borrow_mut();
        let best = p
            .iter()
            .enumerate()
            .filter(|(_, v)| v.capacity() >= n)
            .min_by_key(|(_, v)| v.capacity())
            .map(|(i, _)| i);
        match best {
            Some(i) => {
                let mut v = p.swap_remove(i);
                v.clear();
                v
            }
            None => Vec::with_capacity(n),
        }
    })
}

fn recycle(v: Vec<C64>) {
    if v.capacity() < POOL_MIN_LEN {
        return;
    }
    // thread-local may already be gone during thread teardown
    let _ = POOL.try_with(|p| {
        let mut p = p.borrow_mut();
        if p.len() < POOL_MAX_BUFFERS {
            p.push(v);
        }
    });
}

/// Zero-filled storage of length `n`, reusing freed array buffers.
pub(crate) fn pooled_zeros(n: usize) -> Vec<C64> {
    let mut v = pooled_empty(n);
    v.resize(n, C64::new(0.0, 0.0));
    v
}

/// `src.map(f)` into reused storage.
pub(crate) fn pooled_map(src: &[C64], f: impl Fn(C64) -> C64) -> Vec<C64> {
    let mut v = pooled_empty(src.len());
    v.extend(src.iter().map(|&x| f(x)));
    v
}

/// `a.zip(b).map(f)` into reused storage.
pub(crate) fn pooled_zip(a: &[C64], b: &[C64], f: impl Fn(C64, C64) -> C64) -> Vec<C64> {
    let mut v = pooled_empty(a.len().min(b.len()));
    v.extend(a.iter().zip(b).map(|(&x, &y)| f(x, y)));
    v
}

/// Semantic label of an array axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Signals,
    Time,
    Channels,
    Inputs,
    Outputs,
    Taps,
}

impl Axis {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        [
            Axis::Signals,
            Axis::Time,
            Axis::Channels,
            Axis::Inputs,
            Axis::Outputs,
            Axis::Taps,
        ]
        .into_iter()
        .find(|a| a.code() == code)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Signals => "signals",
            Axis::Time => "time",
            Axis::Channels => "channels",
            Axis::Inputs => "inputs",
            Axis::Outputs => "outputs",
            Axis::Taps => "taps",
        })
    }
}

/// Dense row-major complex array with up to three labeled axes.
#[derive(Debug, PartialEq)]
pub struct CxArray {
    data: Vec<C64>,
    dims: Vec<usize>,
    axes: Vec<Axis>,
}

impl Clone for CxArray {
    fn clone(&self) -> Self {
        let mut data = pooled_empty(self.data.len());
        data.extend_from_slice(&self.data);
        Self {
            data,
            dims: self.dims.clone(),
            axes: self.axes.clone(),
        }
    }
}

impl Drop for CxArray {
    fn drop(&mut self) {
        recycle(std::mem::take(&mut self.data));
    }
}

impl CxArray {
    pub fn new(data: Vec<C64>, dims: &[usize], axes: &[Axis]) -> Result<Self> {
        if dims.is_empty() || dims.len() > 3 {
            return Err(Error::shape(format!("arrays have 1 to 3 axes, got {}", dims.len())));
        }
        if dims.len() != axes.len() {
            return Err(Error::shape(format!(
                "{} dims but {} axis labels",
                dims.len(),
                axes.len()
            )));
        }
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].contains(a) {
                return Err(Error::shape(format!("axis label {a} repeated")));
            }
        }
        let size: usize = dims.iter().product();
        if size != data.len() {
            return Err(Error::shape(format!(
                "dims {dims:?} need {size} elements, got {}",
                data.len()
            )));
        }
        Ok(Self {
            data,
            dims: dims.to_vec(),
            axes: axes.to_vec(),
        })
    }

    pub fn zeros(dims: &[usize], axes: &[Axis]) -> Result<Self> {
        Self::new(vec![C64::new(0.0, 0.0); dims.iter().product()], dims, axes)
    }

    /// `[signals, time, channels]` array.
    pub fn signals(data: Vec<C64>, signals: usize, time: usize, channels: usize) -> Result<Self> {
        Self::new(
            data,
            &[signals, time, channels],
            &[Axis::Signals, Axis::Time, Axis::Channels],
        )
    }

    /// Single-element array holding a scalar.
    pub fn scalar(v: C64) -> Self {
        Self {
            data: vec![v],
            dims: vec![1],
            axes: vec![Axis::Outputs],
        }
    }

    pub(crate) fn from_parts_unchecked(data: Vec<C64>, dims: Vec<usize>, axes: Vec<Axis>) -> Self {
        debug_assert_eq!(data.len(), dims.iter().product::<usize>());
        Self { data, dims, axes }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            data: pooled_zeros(self.data.len()),
            dims: self.dims.clone(),
            axes: self.axes.clone(),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(mut self) -> Vec<C64> {
        std::mem::take(&mut self.data)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_shape(&self, other: &CxArray) -> bool {
        self.dims == other.dims
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub(crate) fn dims3(&self) -> Result<[usize; 3]> {
        match self.dims.as_slice() {
            &[a, b, c] => Ok([a, b, c]),
            d => Err(Error::shape(format!("expected a 3-axis array, got dims {d:?}"))),
        }
    }
}
