use mvgrf::likelihood::{ridge_report, simulate_observations, LikelihoodProblem, ModelFamily};
use mvgrf::GridSpec;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn anisotropy_grows_with_infill() {
    let family = ModelFamily::Matern { nu: 1.0 };
    let truth = [0.0, 20f64.ln()];
    let medians: Vec<f64> = [100usize, 200, 400]
        .iter()
        .map(|&n| {
            let grid = GridSpec::lattice(&[n], 1.0 / (n as f64 - 1.0)).unwrap();
            median(
                (0..3)
                    .map(|r| {
                        let y = simulate_observations(grid, family, truth, 7, r).unwrap();
                        ridge_report(&LikelihoodProblem::new(grid, y, family).unwrap()).unwrap().ratio
                    })
                    .collect(),
            )
        })
        .collect();
    assert!(medians.windows(2).all(|w| w[1] >= w[0]), "median ratios {medians:?}");
}
