//! Bessel functions of the first kind by Miller's backward recurrence.

/// `J_0(x) … J_{n_max}(x)` for `x >= 0`.
pub fn bessel_j_sequence(x: f64, n_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    // Start well above both n_max and x so the recurrence has settled.
    let start = {
        let m = n_max.max(x.ceil() as usize) + 20 + (40.0 * x.sqrt()) as usize;
        m + (m % 2)
    };
    let mut next = 0.0f64;
    let mut cur = 1e-300f64;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        // J_{k-1} = (2k/x) J_k - J_{k+1}
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if k - 1 <= n_max {
            out[k - 1] = cur;
        }
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            next *= 1e-250;
            cur *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    // J_0 + 2 Σ J_{2k} = 1
    norm += cur;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let j = bessel_j_sequence(1.0, 3);
        assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-15);
        let j = bessel_j_sequence(10.0, 30);
        assert!((j[0] - -0.245_935_764_451_348_3).abs() < 1e-14);
        assert!((j[5] - -0.234_061_528_186_793_6).abs() < 1e-14);
        assert!(j[30].abs() < 1e-10 && j[30] > 0.0);
    }

    #[test]
    fn addition_identity() {
        for x in [0.01, 0.4, 3.0, 25.0, 120.0] {
            let j = bessel_j_sequence(x, 200);
            let s: f64 = j[0] * j[0] + 2.0 * j[1..].iter().map(|v| v * v).sum::<f64>();
            assert!((s - 1.0).abs() < 1e-13, "{x}: {s}");
        }
    }
}
