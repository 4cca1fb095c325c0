use rsbb::uncertainty::{SetKind, UncertaintySet};

fn main() {
    let (a0, a) = (-1.0, [0.8, -0.3, 0.5]);
    for kind in [SetKind::Box, SetKind::Ellipsoidal, SetKind::Polyhedral] {
        let set = UncertaintySet::new(kind, 0.5).unwrap();
        let (xi, value) = set.worst_case(a0, &a);
        println!("{kind:<11} xi = {xi:>6.3?}  max a0 + a.xi = {value:.4}");
    }
}
