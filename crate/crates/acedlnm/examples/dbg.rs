use acedlnm::spline::*;

fn main() {
    let times: Vec<f64> = (1..=10).map(|t| t as f64 - 0.5).collect();
    // rebuild pieces manually
    let n = times.len();
    let step = 1.0;
    let c = 1.0;
    let mut knots = Vec::new();
    knots.push(times[0] - (c + 1.0) * step);
    for _ in 0..3 { knots.push(times[0] - c * step); }
    knots.extend_from_slice(&times);
    for _ in 0..3 { knots.push(times[n-1] + c * step); }
    knots.push(times[n-1] + (c + 1.0) * step);
    println!("knots: {:?}", knots);
    let boundary = [knots[3], knots[knots.len()-4]];
    println!("boundary: {:?}", boundary);
    let kv = KnotVector::new(knots.clone(), boundary).unwrap();
    let basis = BSplineBasis::new(kv);
    println!("n_basis = {}", basis.n_basis);
    let mut pts: Vec<f64> = knots[0..4].to_vec();
    pts.extend_from_slice(&times);
    pts.extend_from_slice(&knots[n+4..n+8]);
    for &x in &pts {
        match basis.eval::<f64>(x) {
            Ok(r) => println!("x={:5.1} start={} vals={:?}", x, r.start, r.vals),
            Err(e) => println!("x={:5.1} ERR {}", x, e),
        }
    }
}
