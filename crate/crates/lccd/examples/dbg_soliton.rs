use lccd::scenarios::{make_curve, Family};
use lccd::geometry;

fn main() {
    for n in [64usize, 96, 128] {
        let c = make_curve(&Family::Circle { r: 1.0 }, n).unwrap();
        let g = geometry(&c).unwrap();
        let raddev = c.points().iter().map(|p| (p[0].hypot(p[1]) - 1.0).abs()).fold(0.0_f64, f64::max);
        let kss_l2 = g.integrate_with(|i| g.k_ss[i] * g.k_ss[i]).sqrt();
        let kdev = g.k.iter().map(|k| (k - 1.0).abs()).fold(0.0_f64, f64::max);
        let vdev = g.speed.iter().map(|v| (v - 1.0).abs()).fold(0.0_f64, f64::max);
        println!("n={n}: raddev={raddev:.3e} vdev={vdev:.3e} kdev={kdev:.3e} |k_ss|={kss_l2:.3e}");
    }
    // doubly covered circle n=256
    let c = make_curve(&Family::MultiCircle { r: 1.0, omega: 2 }, 256).unwrap();
    let g = geometry(&c).unwrap();
    let raddev = c.points().iter().map(|p| (p[0].hypot(p[1]) - 1.0).abs()).fold(0.0_f64, f64::max);
    let kss_l2 = g.integrate_with(|i| g.k_ss[i] * g.k_ss[i]).sqrt();
    println!("multi2 n=256: raddev={raddev:.3e} |k_ss|={kss_l2:.3e} L={:.6}", g.length);
}
