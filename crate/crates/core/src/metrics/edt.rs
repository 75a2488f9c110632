//! Exact squared Euclidean distance transform (Felzenszwalb & Huttenlocher
//! lower envelope of parabolas), separable over the three axes with
//! per-axis voxel spacing.
//!
//! With integer-valued spacings every intermediate value is an integer, so
//! the output squared distances are exact.

/// Squared distance (mm²) from every voxel of a `dims` grid to the nearest
/// voxel with `features[i] == true`. Voxels are x-fastest. Returns all
/// `f64::INFINITY` when there are no features.
pub fn squared_edt(features: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> Vec<f64> {
    let n: usize = dims.iter().product();
    assert_eq!(features.len(), n, "feature grid size mismatch");
    let mut f: Vec<f64> = features
        .iter()
        .map(|&b| if b { 0.0 } else { f64::INFINITY })
        .collect();
    let longest = *dims.iter().max().unwrap_or(&1);
    let mut scratch = Scratch::new(longest);
    for axis in 0..3 {
        transform_axis(&mut f, dims, axis, spacing[axis] * spacing[axis], &mut scratch);
    }
    f
}

struct Scratch {
    line: Vec<f64>,
    out: Vec<f64>,
    v: Vec<usize>,
    z: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            line: vec![0.0; n],
            out: vec![0.0; n],
            v: vec![0; n],
            z: vec![0.0; n + 1],
        }
    }
}

fn transform_axis(f: &mut [f64], dims: [usize; 3], axis: usize, w2: f64, s: &mut Scratch) {
    let stride: usize = dims[..axis].iter().product();
    let len = dims[axis];
    let (u, v) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    for j in 0..dims[v] {
        for i in 0..dims[u] {
            let mut p = [0usize; 3];
            p[u] = i;
            p[v] = j;
            let base = p[0] + dims[0] * (p[1] + dims[1] * p[2]);
            for k in 0..len {
                s.line[k] = f[base + k * stride];
            }
            envelope_1d(&s.line[..len], w2, &mut s.out[..len], &mut s.v, &mut s.z);
            for k in 0..len {
                f[base + k * stride] = s.out[k];
            }
        }
    }
}

/// `out[q] = min_p w2 * (q - p)^2 + f[p]` over finite `f[p]`.
fn envelope_1d(f: &[f64], w2: f64, out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k: isize = -1;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        let fq = f[q] + w2 * (q * q) as f64;
        loop {
            if k < 0 {
                k = 0;
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            let p = v[k as usize];
            let fp = f[p] + w2 * (p * p) as f64;
            let sep = (fq - fp) / (2.0 * w2 * (q - p) as f64);
            if sep <= z[k as usize] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k as usize] = q;
            z[k as usize] = sep;
            z[k as usize + 1] = f64::INFINITY;
            break;
        }
    }
    if k < 0 {
        out.fill(f64::INFINITY);
        return;
    }
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        *o = w2 * d * d + f[p];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(features: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> Vec<f64> {
        let idx = |i: usize| [i % dims[0], (i / dims[0]) % dims[1], i / (dims[0] * dims[1])];
        (0..features.len())
            .map(|i| {
                let a = idx(i);
                features
                    .iter()
                    .enumerate()
                    .filter(|(_, &b)| b)
                    .map(|(j, _)| {
                        let b = idx(j);
                        (0..3)
                            .map(|k| {
                                let d = (a[k] as f64 - b[k] as f64) * spacing[k];
                                d * d
                            })
                            .sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    #[test]
    fn single_feature_in_line() {
        let f = [false, false, true, false, false];
        let d = squared_edt(&f, [5, 1, 1], [2.0, 1.0, 1.0]);
        assert_eq!(d, vec![16.0, 4.0, 0.0, 4.0, 16.0]);
    }

    #[test]
    fn no_features_is_infinite() {
        let d = squared_edt(&[false; 8], [2, 2, 2], [1.0; 3]);
        assert!(d.iter().all(|v| v.is_infinite()));
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            dims in prop::array::uniform3(1usize..7),
            seed in any::<u64>(),
            spacing in prop::array::uniform3(1u8..4),
        ) {
            let n: usize = dims.iter().product();
            let mut state = seed | 1;
            let features: Vec<bool> = (0..n).map(|_| {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                state % 5 == 0
            }).collect();
            let sp = spacing.map(f64::from);
            let got = squared_edt(&features, dims, sp);
            let want = brute(&features, dims, sp);
            prop_assert_eq!(got, want);
        }
    }
}
