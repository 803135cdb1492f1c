//! Type alphabets, multi-indices and scalings.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::q::Q;

/// Space-time scaling `s = (s_0, ..., s_d)`, `s_0` being the time weight.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scaling {
    weights: Vec<u32>,
}

impl Scaling {
    pub fn new(weights: Vec<u32>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::Spec("scaling needs a time weight and at least one space weight".into()));
        }
        if weights.iter().any(|&w| w == 0) {
            return Err(Error::Spec("scaling weights must be positive".into()));
        }
        Ok(Self { weights })
    }

    /// Parabolic scaling `(2, 1, ..., 1)` in `d` space dimensions.
    pub fn parabolic(d: usize) -> Self {
        let mut weights = vec![1; d + 1];
        weights[0] = 2;
        Self { weights }
    }

    pub fn dim(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    pub fn abs(&self) -> u32 {
        self.weights.iter().sum()
    }

    pub fn degree(&self, k: &MultiIndex) -> u32 {
        debug_assert_eq!(k.len(), self.weights.len());
        k.0.iter().zip(&self.weights).map(|(a, b)| a * b).sum()
    }
}

/// Multi-index `k ∈ N^{d+1}`; entry 0 is the time direction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(d: usize) -> Self {
        Self(vec![0; d + 1])
    }

    pub fn unit(d: usize, i: usize) -> Self {
        let mut v = vec![0; d + 1];
        v[i] = 1;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    /// Plain total order `Σ k_i`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }

    pub fn bump(&self, i: usize) -> MultiIndex {
        let mut v = self.0.clone();
        v[i] += 1;
        MultiIndex(v)
    }

    /// `k! = Π_i k_i!`.
    pub fn factorial(&self) -> u64 {
        self.0.iter().map(|&k| (1..=k as u64).product::<u64>()).product()
    }

    /// All `m ≤ self` componentwise.
    pub fn below(&self) -> Vec<MultiIndex> {
        let mut out = vec![Vec::with_capacity(self.len())];
        for &k in &self.0 {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..=k).map(move |j| {
                        let mut p = prefix.clone();
                        p.push(j);
                        p
                    })
                })
                .collect();
        }
        out.into_iter().map(MultiIndex).collect()
    }

    /// Multi-index binomial `Π_i C(n_i, m_i)`.
    pub fn binomial(n: &MultiIndex, m: &MultiIndex) -> u64 {
        n.0.iter().zip(&m.0).map(|(&a, &b)| binom(a as u64, b as u64)).product()
    }

    /// All multi-indices of scaled degree at most `max_degree`.
    pub fn up_to_degree(scaling: &Scaling, max_degree: u32) -> Vec<MultiIndex> {
        let mut out = vec![(Vec::new(), 0u32)];
        for &w in scaling.weights() {
            let mut next = Vec::new();
            for (prefix, deg) in out {
                let mut j = 0;
                while deg + j * w <= max_degree {
                    let mut p = prefix.clone();
                    p.push(j);
                    next.push((p, deg + j * w));
                    j += 1;
                }
            }
            out = next;
        }
        let mut v: Vec<_> = out.into_iter().map(|(p, deg)| (deg, MultiIndex(p))).collect();
        v.sort();
        v.into_iter().map(|(_, k)| k).collect()
    }
}

fn binom(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r = 1u64;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Kind {
    Kernel,
    Noise,
}

/// Extension marker carried by a type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mark {
    Base,
    /// Extended noise copy `(Ξ, i)`.
    Noise(String),
    /// Dual kernel copy `t̄`.
    Dual,
}

/// A type id: base name, kind, and extension mark.
///
/// Rendered as `name`, `name[i]` for an extended noise copy and `name~` for
/// the dual of a kernel type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeId {
    pub name: String,
    pub kind: Kind,
    pub mark: Mark,
}

impl TypeId {
    pub fn kernel(name: &str) -> Self {
        Self { name: name.to_string(), kind: Kind::Kernel, mark: Mark::Base }
    }

    pub fn noise(name: &str) -> Self {
        Self { name: name.to_string(), kind: Kind::Noise, mark: Mark::Base }
    }

    pub fn is_noise(&self) -> bool {
        self.kind == Kind::Noise
    }

    pub fn is_kernel(&self) -> bool {
        self.kind == Kind::Kernel
    }

    pub fn is_dual(&self) -> bool {
        self.mark == Mark::Dual
    }

    pub fn is_base(&self) -> bool {
        self.mark == Mark::Base
    }

    /// Dual copy of a base kernel type.
    pub fn dual(&self) -> Result<Self> {
        if !self.is_kernel() {
            return Err(Error::NotAKernel(self.to_string()));
        }
        Ok(Self { name: self.name.clone(), kind: Kind::Kernel, mark: Mark::Dual })
    }

    /// Extended copy `(Ξ, label)` of a noise type.
    pub fn labelled(&self, label: &str) -> Result<Self> {
        if !self.is_noise() {
            return Err(Error::InvalidEdge(format!("`{self}` is not a noise type")));
        }
        Ok(Self { name: self.name.clone(), kind: Kind::Noise, mark: Mark::Noise(label.to_string()) })
    }

    /// The projection `q` onto the base alphabet.
    pub fn base(&self) -> Self {
        Self { name: self.name.clone(), kind: self.kind, mark: Mark::Base }
    }

    pub fn label(&self) -> Option<&str> {
        match &self.mark {
            Mark::Noise(l) => Some(l),
            _ => None,
        }
    }
}

impl fmt::Display for TypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.mark {
            Mark::Base => write!(f, "{}", self.name),
            Mark::Noise(l) => write!(f, "{}[{}]", self.name, l),
            Mark::Dual => write!(f, "{}~", self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeInfo {
    pub hom: Q,
    pub reg: Option<Q>,
}

/// The type alphabet: kernel types `L+`, noise types `L-`, homogeneities,
/// regularities, scaling, and the dual-kernel regularity `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeTable {
    pub scaling: Scaling,
    pub kernels: BTreeMap<String, TypeInfo>,
    pub noises: BTreeMap<String, TypeInfo>,
    pub theta: Option<Q>,
}

impl TypeTable {
    pub fn new(scaling: Scaling) -> Self {
        Self { scaling, kernels: BTreeMap::new(), noises: BTreeMap::new(), theta: None }
    }

    pub fn with_kernel(mut self, name: &str, hom: Q, reg: Option<Q>) -> Self {
        self.kernels.insert(name.into(), TypeInfo { hom, reg });
        self
    }

    pub fn with_noise(mut self, name: &str, hom: Q, reg: Option<Q>) -> Self {
        self.noises.insert(name.into(), TypeInfo { hom, reg });
        self
    }

    pub fn with_theta(mut self, theta: Q) -> Self {
        self.theta = Some(theta);
        self
    }

    pub fn dim(&self) -> usize {
        self.scaling.dim()
    }

    pub fn kernel_ids(&self) -> Vec<TypeId> {
        self.kernels.keys().map(|n| TypeId::kernel(n)).collect()
    }

    pub fn noise_ids(&self) -> Vec<TypeId> {
        self.noises.keys().map(|n| TypeId::noise(n)).collect()
    }

    /// Resolves a rendered type id (`t`, `t~`, `Xi`, `Xi[1]`).
    pub fn resolve(&self, s: &str) -> Result<TypeId> {
        if let Some(base) = s.strip_suffix('~') {
            return self.resolve(base)?.dual();
        }
        if let Some(open) = s.find('[') {
            let label = s[open + 1..]
                .strip_suffix(']')
                .ok_or_else(|| Error::UnknownType(s.to_string()))?;
            return self.resolve(&s[..open])?.labelled(label);
        }
        if self.kernels.contains_key(s) {
            Ok(TypeId::kernel(s))
        } else if self.noises.contains_key(s) {
            Ok(TypeId::noise(s))
        } else {
            Err(Error::UnknownType(s.to_string()))
        }
    }

    fn info(&self, t: &TypeId) -> Result<&TypeInfo> {
        let map = match t.kind {
            Kind::Kernel => &self.kernels,
            Kind::Noise => &self.noises,
        };
        map.get(&t.name).ok_or_else(|| Error::UnknownType(t.to_string()))
    }

    /// Homogeneity; extended copies inherit the base value.
    pub fn hom(&self, t: &TypeId) -> Result<Q> {
        Ok(self.info(t)?.hom)
    }

    /// Regularity; extended noise copies inherit the base value and dual
    /// kernels get `θ`.
    pub fn reg(&self, t: &TypeId) -> Result<Q> {
        if t.is_dual() {
            return self
                .theta
                .ok_or_else(|| Error::Spec(format!("no theta configured for dual type `{t}`")));
        }
        self.info(t)?
            .reg
            .ok_or_else(|| Error::Spec(format!("missing reg entry for type `{}`", t.base())))
    }

    pub fn validate(&self) -> Result<()> {
        for k in self.kernels.keys() {
            if self.noises.contains_key(k) {
                return Err(Error::Spec(format!("type `{k}` is both kernel and noise")));
            }
        }
        for (k, info) in &self.kernels {
            if info.hom <= Q::zero() {
                return Err(Error::Spec(format!("kernel type `{k}` needs positive homogeneity")));
            }
        }
        for (k, info) in &self.noises {
            if info.hom >= Q::zero() {
                return Err(Error::Spec(format!("noise type `{k}` needs negative homogeneity")));
            }
        }
        if let Some(theta) = self.theta {
            if theta <= Q::zero() {
                return Err(Error::Spec("theta must be positive".into()));
            }
        }
        for name in self.kernels.keys().chain(self.noises.keys()) {
            if name.is_empty() || name.contains(|c: char| "^(){},~[]-> ".contains(c)) {
                return Err(Error::Spec(format!("type name `{name}` contains reserved characters")));
            }
        }
        Ok(())
    }

    /// Suggests `reg(t) = hom(t) + min noise hom + slack` for kernel types and
    /// `reg(Ξ) = hom(Ξ)` for noises. Never applied automatically.
    pub fn suggest_reg(&self, slack: Q) -> BTreeMap<String, Q> {
        let worst = self.noises.values().map(|i| i.hom).min().unwrap_or_else(Q::zero);
        let mut out = BTreeMap::new();
        for (k, info) in &self.kernels {
            out.insert(k.clone(), info.hom + worst + slack);
        }
        for (k, info) in &self.noises {
            out.insert(k.clone(), info.hom);
        }
        out
    }
}
