//! Legendre polynomials on [-1, 1].
//!
//! L_0 = 1, L_1 = x, (n+1) L_{n+1} = (2n+1) x L_n - n L_{n-1}
//! L'_{n+1} = (2n+1) L_n + L'_{n-1}

/// Evaluate L_k(x) with the three-term recurrence.
pub fn legendre(k: usize, x: f64) -> f64 {
    legendre_pair(k, x).0
}

/// Evaluate L'_k(x) with the derivative recurrence.
pub fn legendre_deriv(k: usize, x: f64) -> f64 {
    legendre_pair(k, x).1
}

/// Evaluate `(L_k(x), L'_k(x))` in one sweep.
pub fn legendre_pair(k: usize, x: f64) -> (f64, f64) {
    if k == 0 {
        return (1.0, 0.0);
    }
    // (L_{n-1}, L_n) and (L'_{n-1}, L'_n), starting at n = 1
    let (mut l_prev, mut l_cur) = (1.0, x);
    let (mut d_prev, mut d_cur) = (0.0, 1.0);
    for n in 1..k {
        let nf = n as f64;
        let l_next = ((2.0 * nf + 1.0) * x * l_cur - nf * l_prev) / (nf + 1.0);
        let d_next = (2.0 * nf + 1.0) * l_cur + d_prev;
        l_prev = l_cur;
        l_cur = l_next;
        d_prev = d_cur;
        d_cur = d_next;
    }
    (l_cur, d_cur)
}

/// Second derivative L''_k(x), valid for |x| < 1 (from Legendre's equation).
pub(crate) fn legendre_second_deriv_interior(k: usize, x: f64) -> f64 {
    let (l, d) = legendre_pair(k, x);
    let kf = k as f64;
    (2.0 * x * d - kf * (kf + 1.0) * l) / (1.0 - x * x)
}
