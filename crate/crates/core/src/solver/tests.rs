use super::*;

fn prog(c: Vec<f64>, m: usize, entries: &[(usize, usize, f64)], b: Vec<f64>, cones: Vec<Cone>) -> ConvexProgram {
    let mut a = Triplets { m, n: c.len(), ..Default::default() };
    for &(r, col, v) in entries {
        a.push(r, col, v);
    }
    ConvexProgram { c, a, b, cones }
}

#[test]
fn small_lp() {
    // max x + y  s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0  -> (8/5, 6/5)
    let p = prog(
        vec![-1.0, -1.0],
        4,
        &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 3.0), (1, 1, 1.0), (2, 0, -1.0), (3, 1, -1.0)],
        vec![4.0, 6.0, 0.0, 0.0],
        vec![Cone::Nonneg(4)],
    );
    let out = solve(&p, &Settings::default());
    assert_eq!(out.status, Status::Optimal);
    assert!((out.x[0] - 1.6).abs() < 1e-7 && (out.x[1] - 1.2).abs() < 1e-7, "{:?}", out.x);
}

#[test]
fn lp_with_equality() {
    // min x - y  s.t. x + y = 1, 0 <= x, y <= 1 -> x = 0, y = 1
    let p = prog(
        vec![1.0, -1.0],
        5,
        &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, -1.0), (2, 1, -1.0), (3, 0, 1.0), (4, 1, 1.0)],
        vec![1.0, 0.0, 0.0, 1.0, 1.0],
        vec![Cone::Zero(1), Cone::Nonneg(4)],
    );
    let out = solve(&p, &Settings::default());
    assert_eq!(out.status, Status::Optimal);
    assert!(out.x[0].abs() < 1e-7 && (out.x[1] - 1.0).abs() < 1e-7);
    assert!((out.objective + 1.0).abs() < 1e-7);
}

#[test]
fn socp_disc() {
    // min x + y s.t. ||(x, y)|| <= 1 -> -sqrt(2)
    let p = prog(
        vec![1.0, 1.0],
        3,
        &[(1, 0, -1.0), (2, 1, -1.0)],
        vec![1.0, 0.0, 0.0],
        vec![Cone::Soc(3)],
    );
    let out = solve(&p, &Settings::default());
    assert_eq!(out.status, Status::Optimal);
    assert!((out.objective + 2f64.sqrt()).abs() < 1e-7, "{}", out.objective);
}

#[test]
fn rotated_cone_via_soc() {
    // min t s.t. t * 1 >= x^2 with x = 3 encoded as ||(2x, t - 1)|| <= t + 1
    // variables (x, t)
    let p = prog(
        vec![0.0, 1.0],
        4,
        &[(0, 0, 1.0), (1, 1, -1.0), (2, 0, -2.0), (3, 1, -1.0)],
        vec![3.0, 1.0, 0.0, -1.0],
        vec![Cone::Zero(1), Cone::Soc(3)],
    );
    let out = solve(&p, &Settings::default());
    assert_eq!(out.status, Status::Optimal);
    assert!((out.x[1] - 9.0).abs() < 1e-6, "{:?}", out.x);
}

#[test]
fn detects_primal_infeasible() {
    // x <= -1 and x >= 1
    let p = prog(vec![1.0], 2, &[(0, 0, 1.0), (1, 0, -1.0)], vec![-1.0, -1.0], vec![Cone::Nonneg(2)]);
    let out = solve(&p, &Settings::default());
    assert_eq!(out.status, Status::PrimalInfeasible);
}

#[test]
fn detects_infeasible_cone() {
    // ||x|| <= 1 and x >= 2
    let p = prog(
        vec![0.0],
        3,
        &[(1, 0, -1.0), (2, 0, -1.0)],
        vec![1.0, 0.0, -2.0],
        vec![Cone::Soc(2), Cone::Nonneg(1)],
    );
    let out = solve(&p, &Settings::default());
    assert_eq!(out.status, Status::PrimalInfeasible);
}

#[test]
fn detects_unbounded() {
    // min -x s.t. x >= 0
    let p = prog(vec![-1.0], 1, &[(0, 0, -1.0)], vec![0.0], vec![Cone::Nonneg(1)]);
    let out = solve(&p, &Settings::default());
    assert_eq!(out.status, Status::DualInfeasible);
}

#[test]
fn program_roundtrips_through_json() {
    let p = prog(vec![1.0, 2.0], 2, &[(0, 0, 1.0), (1, 1, -1.0)], vec![1.0, 0.0], vec![Cone::Zero(1), Cone::Soc(1 + 1)]);
    let text = serde_json::to_string(&p).unwrap();
    assert!(text.contains("\"A\"") && text.contains("\"soc\""));
    let back: ConvexProgram = serde_json::from_str(&text).unwrap();
    assert_eq!(back, p);
}
