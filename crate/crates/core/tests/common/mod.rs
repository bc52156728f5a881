//! Brute-force reference implementations shared by the integration tests.
//! Nothing here calls into the library's kernels.

#![allow(dead_code)]

use faer::Mat;
use rainbow::C64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

pub type M2 = [[C64; 2]; 2];

pub fn pauli(name: char) -> M2 {
    let (o, z, i) = (ONE, ZERO, C64::new(0.0, 1.0));
    match name {
        'I' => [[o, z], [z, o]],
        'X' => [[z, o], [o, z]],
        'Y' => [[z, -i], [i, z]],
        'Z' => [[o, z], [z, -o]],
        _ => panic!("unknown Pauli {name}"),
    }
}

/// Nearest-neighbour bonds of an `lx` by `ly` open lattice as qubit index
/// pairs, with site `(i, j)` at `(j - 1) lx + (i - 1)`.
pub fn bonds(lx: usize, ly: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for j in 0..ly {
        for i in 0..lx {
            let k = j * lx + i;
            if i + 1 < lx {
                out.push((k, k + 1));
            }
            if j + 1 < ly {
                out.push((k, k + lx));
            }
        }
    }
    out
}

/// `out += c (A_a B_b) psi`, element by element.
pub fn add_two_site(out: &mut [C64], psi: &[C64], a: usize, b: usize, ma: &M2, mb: &M2, c: f64) {
    for (x, &v) in psi.iter().enumerate() {
        if v == ZERO {
            continue;
        }
        let (xa, xb) = ((x >> a) & 1, (x >> b) & 1);
        for ya in 0..2 {
            for yb in 0..2 {
                let m = ma[ya][xa] * mb[yb][xb];
                if m == ZERO {
                    continue;
                }
                let y = (x & !(1 << a) & !(1 << b)) | (ya << a) | (yb << b);
                out[y] += v * m * c;
            }
        }
    }
}

/// `sum_bonds jx XX + jy YY` applied to `psi`.
pub fn xy_apply(lx: usize, ly: usize, jx: f64, jy: f64, psi: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; psi.len()];
    let (x, y) = (pauli('X'), pauli('Y'));
    for (a, b) in bonds(lx, ly) {
        add_two_site(&mut out, psi, a, b, &x, &x, jx);
        add_two_site(&mut out, psi, a, b, &y, &y, jy);
    }
    out
}

/// `kron` with the first factor acting on the highest qubit.
pub fn kron(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
    let (ra, ca, rb, cb) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ra * rb, ca * cb, |r, c| a[(r / rb, c / cb)] * b[(r % rb, c % cb)])
}

fn m2(m: &M2) -> Mat<C64> {
    Mat::from_fn(2, 2, |r, c| m[r][c])
}

/// Pauli string operator with `ops[q]` on qubit `q` (identity elsewhere).
pub fn pauli_string(n: usize, ops: &[(usize, char)]) -> Mat<C64> {
    let mut acc = Mat::from_fn(1, 1, |_, _| ONE);
    for q in (0..n).rev() {
        let p = ops.iter().find(|(k, _)| *k == q).map(|(_, p)| *p).unwrap_or('I');
        acc = kron(&acc, &m2(&pauli(p)));
    }
    acc
}

/// Dense XY Hamiltonian from Kronecker products of Pauli matrices.
pub fn xy_dense(lx: usize, ly: usize, jx: f64, jy: f64) -> Mat<C64> {
    let n = lx * ly;
    let mut h = Mat::<C64>::zeros(1 << n, 1 << n);
    for (a, b) in bonds(lx, ly) {
        h += pauli_string(n, &[(a, 'X'), (b, 'X')]) * faer::Scale(C64::new(jx, 0.0));
        h += pauli_string(n, &[(a, 'Y'), (b, 'Y')]) * faer::Scale(C64::new(jy, 0.0));
    }
    h
}

pub fn matvec(m: &Mat<C64>, v: &[C64]) -> Vec<C64> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)] * v[c]).sum()).collect()
}

/// `exp(-i H t) v` by a Taylor series on short substeps.
pub fn expm_apply(h: &Mat<C64>, v: &[C64], t: f64) -> Vec<C64> {
    let bound: f64 = (0..h.nrows()).map(|r| (0..h.ncols()).map(|c| h[(r, c)].norm()).sum::<f64>()).fold(0.0, f64::max);
    let steps = ((bound * t.abs()) / 0.5).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let mut cur = v.to_vec();
    for _ in 0..steps {
        let mut term = cur.clone();
        let mut acc = cur.clone();
        for k in 1..60 {
            let ht = matvec(h, &term);
            let f = C64::new(0.0, -dt / k as f64);
            term = ht.into_iter().map(|z| z * f).collect();
            let size: f64 = term.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for (a, z) in acc.iter_mut().zip(&term) {
                *a += z;
            }
            if size < 1e-18 {
                break;
            }
        }
        cur = acc;
    }
    cur
}

/// Dense `exp(-i H t)`, column by column.
pub fn expm(h: &Mat<C64>, t: f64) -> Mat<C64> {
    let d = h.nrows();
    let mut u = Mat::<C64>::zeros(d, d);
    for c in 0..d {
        let mut e = vec![ZERO; d];
        e[c] = ONE;
        let col = expm_apply(h, &e, t);
        for r in 0..d {
            u[(r, c)] = col[r];
        }
    }
    u
}

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn dist(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// `(sigma_label (x) 1) |00> + |11>` normalised, indexed `b(first) + 2 b(second)`.
pub fn bell(label: char) -> [C64; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let p = pauli(label);
    let mut out = [ZERO; 4];
    for b in 0..2 {
        for a in 0..2 {
            out[a + 2 * b] = p[a][b] * h;
        }
    }
    out
}

/// Product of two-qubit states placed on `(first, second)` qubit pairs.
pub fn pair_product(n: usize, pairs: &[(usize, usize, [C64; 4])]) -> Vec<C64> {
    let mut out = vec![ZERO; 1 << n];
    for (x, o) in out.iter_mut().enumerate() {
        let mut amp = ONE;
        for &(a, b, s) in pairs {
            amp *= s[((x >> a) & 1) + 2 * ((x >> b) & 1)];
        }
        *o = amp;
    }
    out
}

/// Rainbow state: mirror pairs `(i, j)-(lx + 1 - i, j)` in Bell states, the
/// left site's checkerboard colour picking `even` or `odd`.
pub fn rainbow(lx: usize, ly: usize, even: char, odd: char) -> Vec<C64> {
    let mut pairs = Vec::new();
    for j in 1..=ly {
        for i in 1..=lx / 2 {
            let l = (j - 1) * lx + i - 1;
            let r = (j - 1) * lx + lx - i;
            let lab = if (i + j) % 2 == 0 { even } else { odd };
            pairs.push((l, r, bell(lab)));
        }
    }
    pair_product(lx * ly, &pairs)
}

/// `rho_keep` of a pure state by summing over every traced configuration.
pub fn partial_trace(psi: &[C64], n: usize, keep: &[usize]) -> Mat<C64> {
    let k = keep.len();
    let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let mut rho = Mat::<C64>::zeros(1 << k, 1 << k);
    let compose = |kv: usize, tv: usize| -> usize {
        let mut x = 0;
        for (bit, &q) in keep.iter().enumerate() {
            x |= ((kv >> bit) & 1) << q;
        }
        for (bit, &q) in traced.iter().enumerate() {
            x |= ((tv >> bit) & 1) << q;
        }
        x
    };
    for tv in 0..1usize << traced.len() {
        for r in 0..1usize << k {
            for c in 0..1usize << k {
                rho[(r, c)] += psi[compose(r, tv)] * psi[compose(c, tv)].conj();
            }
        }
    }
    rho
}

/// Kraus operators `K_s = <s| U |I>` on the rest qubits, for the pair `(q1, q2)`
/// of an `n`-qubit register with propagator `u`; `s` is indexed `b1 + 2 b2`.
pub fn kraus_from_propagator(u: &Mat<C64>, n: usize, q1: usize, q2: usize) -> [Mat<C64>; 4] {
    let rest: Vec<usize> = (0..n).filter(|&q| q != q1 && q != q2).collect();
    let embed = |r: usize, b1: usize, b2: usize| -> usize {
        let mut x = (b1 << q1) | (b2 << q2);
        for (bit, &q) in rest.iter().enumerate() {
            x |= ((r >> bit) & 1) << q;
        }
        x
    };
    let d = 1usize << (n - 2);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    std::array::from_fn(|s| {
        Mat::from_fn(d, d, |r, c| {
            let out = embed(r, s & 1, s >> 1);
            (u[(out, embed(c, 0, 0))] + u[(out, embed(c, 1, 1))]) * h
        })
    })
}

/// Column-stacked superoperator of
/// `rho -> K0 rho K0^+ + K3 rho K3^+ + tr(K1 rho K1^+ + K2 rho K2^+) |0><0|`.
pub fn superoperator(k: &[Mat<C64>; 4]) -> Mat<C64> {
    let d = k[0].nrows();
    let mut s = Mat::<C64>::zeros(d * d, d * d);
    for i in [0, 3] {
        s += kron(&k[i].conjugate().to_owned(), &k[i]);
    }
    // tr(K rho K^+) = sum_{ab} (K^+ K)_{ba} rho_{ab}
    for i in [1, 2] {
        let q = k[i].adjoint() * &k[i];
        for a in 0..d {
            for b in 0..d {
                s[(0, b * d + a)] += q[(b, a)];
            }
        }
    }
    s
}

/// Eigenvalues of a dense complex matrix, largest modulus first.
pub fn eigenvalues_by_modulus(m: &Mat<C64>) -> Vec<C64> {
    let mut ev = m.eigenvalues().expect("eigenvalues");
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    ev
}

/// `rho -> sum K rho K^+` plus the reset weight on `|0><0|`.
pub fn apply_kraus(k: &[Mat<C64>; 4], rho: &Mat<C64>) -> Mat<C64> {
    let mut out = &(&k[0] * rho) * k[0].adjoint() + &(&k[3] * rho) * k[3].adjoint();
    let mut w = ZERO;
    for i in [1, 2] {
        let m = &(&k[i] * rho) * k[i].adjoint();
        w += (0..m.nrows()).map(|r| m[(r, r)]).sum::<C64>();
    }
    out[(0, 0)] += w;
    out
}

pub fn max_abs_diff(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m = 0.0f64;
    for c in 0..a.ncols() {
        for r in 0..a.nrows() {
            m = m.max((a[(r, c)] - b[(r, c)]).norm());
        }
    }
    m
}

/// Trace norm distance `||a - b||_1 / 2` for Hermitian inputs.
pub fn trace_distance(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
    let d = a - b;
    let ev = d.self_adjoint_eigenvalues(faer::Side::Lower).expect("hermitian eigenvalues");
    0.5 * ev.iter().map(|x| x.abs()).sum::<f64>()
}

/// Random density matrix `G G^+ / tr` from a Gaussian-ish `G`.
pub fn random_density<R: rand::Rng>(d: usize, rng: &mut R) -> Mat<C64> {
    let g = Mat::from_fn(d, d, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    let m = &g * g.adjoint();
    let tr: C64 = (0..d).map(|k| m[(k, k)]).sum();
    m * faer::Scale(tr.inv())
}

pub fn random_state<R: rand::Rng>(n: usize, rng: &mut R) -> Vec<C64> {
    let mut v: Vec<C64> = (0..1 << n).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
    let s = norm(&v);
    v.iter_mut().for_each(|z| *z /= s);
    v
}
