mod common;

use labelnoise::model::{init_model, ModelSpec, ModelState};
use labelnoise::{Purpose, RngStream};
use rand::Rng;

use common::{max_relative_error, numeric_gradient};

fn random_instance(
    spec: &ModelSpec,
    batch: usize,
    seed: u64,
) -> (ModelState, Vec<Vec<f64>>, Vec<u8>) {
    let mut model = init_model(spec, &mut RngStream::derive(seed, Purpose::Init, 0)).unwrap();
    let mut rng = RngStream::derive(seed, Purpose::DataGen, 0);
    for p in &mut model.params {
        *p += rng.random_range(-0.5..0.5);
    }
    let rows = (0..batch)
        .map(|_| {
            (0..spec.n_features)
                .map(|_| rng.random_range(-2.0..2.0))
                .collect()
        })
        .collect();
    let labels = (0..batch).map(|_| u8::from(rng.random_bool(0.5))).collect();
    (model, rows, labels)
}

fn check(spec: ModelSpec) {
    for batch in [1, 16] {
        for seed in 0..10 {
            let (model, rows, labels) = random_instance(&spec, batch, seed);
            let batch_rows: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
            let analytic = model.backward(&batch_rows, &labels).unwrap();
            let numeric = numeric_gradient(&model, &batch_rows, &labels, 1e-5);
            let err = max_relative_error(&analytic, &numeric);
            assert!(
                err <= 1e-4,
                "{:?} batch {batch} seed {seed}: rel err {err}",
                spec.kind
            );
        }
    }
}

#[test]
fn logistic_gradient_matches_finite_differences() {
    check(ModelSpec::logistic(6));
}

#[test]
fn mlp_gradient_matches_finite_differences() {
    check(ModelSpec::mlp(5, 7));
}

#[test]
fn dimension_mismatch_is_an_error() {
    let m = ModelState::zeros(&ModelSpec::mlp(3, 2)).unwrap();
    assert!(m.backward(&[&[1.0, 2.0][..]], &[1]).is_err());
    assert!(m.backward(&[&[1.0, 2.0, 3.0][..]], &[1, 0]).is_err());
}
