use crate::model::GronwallParams;

/// `sum_{j=0}^{K} (1+c)^j (a0+a1+a2) e^{b t}`, the growth bound for
/// solutions of delayed impulsive integral inequalities on `[0, T]`.
pub fn gronwall_bound(p: &GronwallParams, t: f64) -> f64 {
    let mut factor = 1.0;
    let mut sum = 0.0;
    for _ in 0..=p.k {
        sum += factor;
        factor *= 1.0 + p.c;
    }
    sum * (p.a0 + p.a1 + p.a2) * (p.b * t).exp()
}
