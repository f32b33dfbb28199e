//! Suffix array construction by induced sorting (SA-IS) over an integer
//! alphabet, and the LCP array by Kasai's algorithm. Both are linear time.

use super::stream::TokenStream;

const NONE: u32 = u32::MAX;

/// Suffix array of `s`, whose symbols must lie in `0..=upper`.
pub fn suffix_array(s: &[u32], upper: u32) -> Vec<u32> {
    debug_assert!(s.iter().all(|&c| c <= upper));
    assert!((s.len() as u64) < NONE as u64, "input too long for 32-bit positions");
    sa_is(s, upper as usize)
}

fn sa_is(s: &[u32], upper: usize) -> Vec<u32> {
    let n = s.len();
    match n {
        0 => return Vec::new(),
        1 => return vec![0],
        2 => return if s[0] < s[1] { vec![0, 1] } else { vec![1, 0] },
        _ => {}
    }

    // ls[i]: suffix i is S-type (smaller than suffix i+1)
    let mut ls = vec![false; n];
    for i in (0..n - 1).rev() {
        ls[i] = if s[i] == s[i + 1] { ls[i + 1] } else { s[i] < s[i + 1] };
    }

    // bucket starts for L-type (sum_l) and S-type (sum_s) suffixes per symbol
    let mut sum_l = vec![0usize; upper + 2];
    let mut sum_s = vec![0usize; upper + 2];
    for i in 0..n {
        let c = s[i] as usize;
        if !ls[i] {
            sum_s[c] += 1;
        } else {
            sum_l[c + 1] += 1;
        }
    }
    for c in 0..=upper {
        sum_s[c] += sum_l[c];
        if c < upper {
            sum_l[c + 1] += sum_s[c];
        }
    }

    let mut sa = vec![NONE; n];
    let induce = |lms: &[u32], sa: &mut [u32]| {
        sa.fill(NONE);
        let mut buf = sum_s.clone();
        for &d in lms {
            let d = d as usize;
            if d == n {
                continue;
            }
            let c = s[d] as usize;
            sa[buf[c]] = d as u32;
            buf[c] += 1;
        }
        buf.copy_from_slice(&sum_l);
        let c = s[n - 1] as usize;
        sa[buf[c]] = (n - 1) as u32;
        buf[c] += 1;
        for i in 0..n {
            let v = sa[i];
            if v != NONE && v >= 1 && !ls[v as usize - 1] {
                let c = s[v as usize - 1] as usize;
                sa[buf[c]] = v - 1;
                buf[c] += 1;
            }
        }
        buf.copy_from_slice(&sum_l);
        for i in (0..n).rev() {
            let v = sa[i];
            if v != NONE && v >= 1 && ls[v as usize - 1] {
                let c = s[v as usize - 1] as usize + 1;
                buf[c] -= 1;
                sa[buf[c]] = v - 1;
            }
        }
    };

    let mut lms_map = vec![NONE; n + 1];
    let mut lms = Vec::new();
    for i in 1..n {
        if !ls[i - 1] && ls[i] {
            lms_map[i] = lms.len() as u32;
            lms.push(i as u32);
        }
    }
    let m = lms.len();

    induce(&lms, &mut sa);

    if m > 0 {
        let mut sorted_lms: Vec<u32> = sa
            .iter()
            .copied()
            .filter(|&v| lms_map[v as usize] != NONE)
            .collect();
        let mut rec_s = vec![0u32; m];
        let mut rec_upper = 0u32;
        rec_s[lms_map[sorted_lms[0] as usize] as usize] = 0;
        for i in 1..m {
            let mut l = sorted_lms[i - 1] as usize;
            let mut r = sorted_lms[i] as usize;
            let next = |p: usize| {
                let k = lms_map[p] as usize + 1;
                if k < m {
                    lms[k] as usize
                } else {
                    n
                }
            };
            let (end_l, end_r) = (next(l), next(r));
            let mut same = end_l - l == end_r - r;
            if same {
                while l < end_l && s[l] == s[r] {
                    l += 1;
                    r += 1;
                }
                if l == n || s[l] != s[r] {
                    same = false;
                }
            }
            if !same {
                rec_upper += 1;
            }
            rec_s[lms_map[sorted_lms[i] as usize] as usize] = rec_upper;
        }

        let rec_sa = sa_is(&rec_s, rec_upper as usize);
        for (dst, &r) in sorted_lms.iter_mut().zip(&rec_sa) {
            *dst = lms[r as usize];
        }
        induce(&sorted_lms, &mut sa);
    }
    sa
}

/// `lcp[i]` is the longest common prefix of the suffixes at `sa[i]` and
/// `sa[i + 1]`, so the array has `n - 1` entries.
pub fn lcp_array(s: &[u32], sa: &[u32]) -> Vec<u32> {
    let n = s.len();
    if n < 2 {
        return Vec::new();
    }
    let mut rank = vec![0u32; n];
    for (i, &p) in sa.iter().enumerate() {
        rank[p as usize] = i as u32;
    }
    let mut lcp = vec![0u32; n - 1];
    let mut h = 0usize;
    for i in 0..n {
        let r = rank[i] as usize;
        if r == 0 {
            h = 0;
            continue;
        }
        let j = sa[r - 1] as usize;
        while i + h < n && j + h < n && s[i + h] == s[j + h] {
            h += 1;
        }
        lcp[r - 1] = h as u32;
        h = h.saturating_sub(1);
    }
    lcp
}

/// Suffix array and LCP array over a token stream.
#[derive(Debug, Clone)]
pub struct SuffixIndex {
    suffix_array: Vec<u32>,
    lcp: Vec<u32>,
}

impl SuffixIndex {
    pub fn suffix_array(&self) -> &[u32] {
        &self.suffix_array
    }

    /// Adjacent-pair LCPs; see [`lcp_array`].
    pub fn lcp(&self) -> &[u32] {
        &self.lcp
    }

    pub fn len(&self) -> usize {
        self.suffix_array.len()
    }

    pub fn is_empty(&self) -> bool {
        self.suffix_array.is_empty()
    }

    /// Suffix-array ranks whose suffix starts with `pattern`.
    pub fn find_range(&self, tokens: &[u32], pattern: &[u32]) -> std::ops::Range<usize> {
        let prefix = |p: u32| {
            let p = p as usize;
            &tokens[p..(p + pattern.len()).min(tokens.len())]
        };
        let lo = self.suffix_array.partition_point(|&p| prefix(p) < pattern);
        let hi = lo + self.suffix_array[lo..].partition_point(|&p| prefix(p) == pattern);
        lo..hi
    }
}

pub fn build_suffix_index(stream: &TokenStream) -> SuffixIndex {
    let tokens = stream.tokens();
    let upper = stream.alphabet_size().saturating_sub(1) as u32;
    let suffix_array = suffix_array(tokens, upper);
    let lcp = lcp_array(tokens, &suffix_array);
    SuffixIndex { suffix_array, lcp }
}
