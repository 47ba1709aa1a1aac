use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Multi-index (exponent vector) of a monomial.
pub type MultiIndex = Vec<u8>;

/// Monomials in `nvars` variables of total degree `<= order`, in graded
/// lexicographic order: degree ascending, then lexicographically descending
/// exponents within a degree (`x1^2, x1 x2, x2^2, ...`).
///
/// A basis of lower order is always a prefix of a basis of higher order with
/// the same variable count, so truncation is a slice operation.
#[derive(Debug)]
pub struct MonomialBasis {
    nvars: usize,
    order: usize,
    exponents: Vec<MultiIndex>,
    degree_start: Vec<usize>,
    lookup: HashMap<MultiIndex, usize>,
    // products[da][db] lists (i, j, k) with deg(i) = da, deg(j) = db and
    // monomial_i * monomial_j = monomial_k.
    products: Vec<Vec<Vec<(u32, u32, u32)>>>,
}

/// Largest order the internal series arithmetic accepts.
pub const MAX_SERIES_ORDER: usize = 12;

fn compositions(total: usize, parts: usize, prefix: &mut Vec<u8>, out: &mut Vec<MultiIndex>) {
    if parts == 1 {
        prefix.push(total as u8);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first as u8);
        compositions(total - first, parts - 1, prefix, out);
        prefix.pop();
    }
}

/// All multi-indices of exactly degree `degree` in `nvars` variables, in the
/// basis order.
pub fn multi_indices_of_degree(nvars: usize, degree: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    if nvars == 0 {
        if degree == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    compositions(degree, nvars, &mut Vec::with_capacity(nvars), &mut out);
    out
}

/// All multi-indices of degree `<= order` in basis order.
pub fn multi_indices_up_to(nvars: usize, order: usize) -> Vec<MultiIndex> {
    (0..=order)
        .flat_map(|d| multi_indices_of_degree(nvars, d))
        .collect()
}

/// `mu!` = product of factorials of the entries.
pub fn multi_factorial(mu: &[u8]) -> f64 {
    mu.iter()
        .map(|&e| (1..=e as u64).product::<u64>() as f64)
        .product()
}

/// Multinomial-style binomial `mu! / (lambda! (mu - lambda)!)`.
pub fn multi_binomial(mu: &[u8], lambda: &[u8]) -> f64 {
    mu.iter()
        .zip(lambda)
        .map(|(&m, &l)| binomial(m as u64, l as u64))
        .product()
}

fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

pub fn degree(mu: &[u8]) -> usize {
    mu.iter().map(|&e| e as usize).sum()
}

impl MonomialBasis {
    fn build(nvars: usize, order: usize) -> Self {
        let mut exponents = Vec::new();
        let mut degree_start = Vec::with_capacity(order + 2);
        for d in 0..=order {
            degree_start.push(exponents.len());
            exponents.extend(multi_indices_of_degree(nvars, d));
        }
        degree_start.push(exponents.len());
        let lookup: HashMap<MultiIndex, usize> = exponents
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        let mut products = vec![vec![Vec::new(); order + 1]; order + 1];
        for da in 0..=order {
            for db in 0..=(order - da) {
                let list = &mut products[da][db];
                for i in degree_start[da]..degree_start[da + 1] {
                    for j in degree_start[db]..degree_start[db + 1] {
                        let sum: MultiIndex = exponents[i]
                            .iter()
                            .zip(&exponents[j])
                            .map(|(a, b)| a + b)
                            .collect();
                        let k = lookup[&sum];
                        list.push((i as u32, j as u32, k as u32));
                    }
                }
            }
        }
        MonomialBasis {
            nvars,
            order,
            exponents,
            degree_start,
            lookup,
            products,
        }
    }

    /// Shared basis for `(nvars, order)`; bases are cached process-wide.
    pub fn get(nvars: usize, order: usize) -> Arc<MonomialBasis> {
        assert!(
            order <= MAX_SERIES_ORDER,
            "series order {order} exceeds MAX_SERIES_ORDER"
        );
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<MonomialBasis>>>> =
            OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|p| p.into_inner());
        guard
            .entry((nvars, order))
            .or_insert_with(|| Arc::new(MonomialBasis::build(nvars, order)))
            .clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[MultiIndex] {
        &self.exponents
    }

    pub fn exponent(&self, i: usize) -> &[u8] {
        &self.exponents[i]
    }

    pub fn index_of(&self, mu: &[u8]) -> Option<usize> {
        self.lookup.get(mu).copied()
    }

    /// Index range of the monomials of exactly degree `d`.
    pub fn degree_range(&self, d: usize) -> std::ops::Range<usize> {
        self.degree_start[d]..self.degree_start[d + 1]
    }

    /// Number of monomials of degree `<= d`.
    pub fn len_up_to(&self, d: usize) -> usize {
        self.degree_start[d.min(self.order) + 1]
    }

    pub(crate) fn products(&self, da: usize, db: usize) -> &[(u32, u32, u32)] {
        &self.products[da][db]
    }
}
