use complabel::datakit::{LabelKind, LabelView};
use complabel::estimator::project;
use complabel::float::argmax;
use complabel::model::{corrected_output, loss_grad_h, modified_loss, softmax, Architecture, Objective};
use complabel::oracle::{conditional_risk, DiscreteProblem};
use complabel::transition::BiasRegime;
use complabel::{SoftmaxModel64, TransitionMatrix64};
use proptest::prelude::*;

fn regime() -> impl Strategy<Value = (usize, usize, u64, u8)> {
    (3usize..=8, 2usize..=7, any::<u64>(), 0u8..3).prop_map(|(c, k, s, r)| (c, k.min(c - 1), s, r))
}

fn build(c: usize, k: usize, seed: u64, which: u8) -> TransitionMatrix64 {
    let regime = match which {
        0 => BiasRegime::Uniform,
        1 => BiasRegime::WithoutZero,
        _ => BiasRegime::WithZero { k },
    };
    TransitionMatrix64::generate(&regime, c, seed).unwrap()
}

fn simplex(c: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, c).prop_map(|v| {
        let s: f64 = v.iter().sum::<f64>() + 1e-9;
        v.iter().map(|x| (x + 1e-9 / v.len() as f64) / s).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn generated_matrices_are_valid((c, k, seed, which) in regime()) {
        let q = build(c, k, seed, which);
        for i in 0..c {
            prop_assert_eq!(q.get(i, i), 0.0);
            let s: f64 = q.row(i).iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-9);
            prop_assert!(q.row(i).iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        if which == 2 {
            prop_assert!(q.zero_columns().is_empty());
            for i in 0..c {
                prop_assert_eq!(q.row(i).iter().filter(|&&v| v > 0.0).count(), k);
            }
        }
        prop_assert_eq!(q, build(c, k, seed, which));
    }

    #[test]
    fn flip_stays_on_simplex((c, k, seed, which) in regime(), raw in prop::collection::vec(0.0f64..1.0, 8)) {
        let q = build(c, k, seed, which);
        let s: f64 = raw[..c].iter().sum::<f64>() + 1e-12;
        let p: Vec<f64> = raw[..c].iter().map(|v| v / s).collect();
        let out = q.flip_posterior(&p).unwrap();
        prop_assert!(out.iter().all(|&v| v >= 0.0));
        prop_assert!((out.iter().sum::<f64>() - p.iter().sum::<f64>()).abs() <= 1e-9);
    }

    #[test]
    fn gradient_bounded_and_zero_sum(
        (c, k, seed, which) in regime(),
        h in prop::collection::vec(-30.0f64..30.0, 8),
        ybar in 0usize..8,
    ) {
        let q = build(c, k, seed, which);
        let g = loss_grad_h(&q, &h[..c], ybar % c);
        prop_assert!(g.iter().all(|&v| (-1.0..=1.0).contains(&v)), "{:?}", g);
        prop_assert!(g.iter().sum::<f64>().abs() <= 1e-9);
    }

    #[test]
    fn softmax_keeps_argmax(h in prop::collection::vec(-50.0f64..50.0, 2..10)) {
        prop_assert_eq!(argmax(&softmax(&h)), argmax(&h));
    }

    #[test]
    fn uniform_corrected_output_closed_form(c in 3usize..10, h in prop::collection::vec(-5.0f64..5.0, 10)) {
        let q = TransitionMatrix64::uniform(c).unwrap();
        let g = softmax(&h[..c]);
        let out = corrected_output(&q, &g).unwrap();
        for (o, gj) in out.iter().zip(&g) {
            prop_assert!((o - (1.0 - gj) / (c as f64 - 1.0)).abs() <= 1e-12);
        }
    }

    #[test]
    fn loss_matches_long_hand_risk(
        (c, k, seed, which) in regime(),
        h in prop::collection::vec(-5.0f64..5.0, 8),
        ybar in 0usize..8,
    ) {
        // the loss at ȳ is the conditional risk against a point mass on ȳ
        let q = build(c, k, seed, which);
        let ybar = ybar % c;
        let mut e = vec![0.0; c];
        e[ybar] = 1.0;
        let g = softmax(&h[..c]);
        let long_hand = conditional_risk(&q, &g, &e).unwrap();
        prop_assert!((modified_loss(&q, &h[..c], ybar) - long_hand).abs() <= 1e-9 * long_hand.max(1.0));
    }

    #[test]
    fn small_step_does_not_increase_loss(
        (c, k, seed, which) in regime(),
        model_seed in any::<u64>(),
        x in prop::collection::vec(-1.0f64..1.0, 4 * 6),
        labels in prop::collection::vec(0usize..8, 6),
        hidden in any::<bool>(),
    ) {
        let q = build(c, k, seed, which);
        let arch = if hidden { Architecture::one_hidden() } else { Architecture::Linear };
        let labels: Vec<usize> = labels.iter().map(|l| l % c).collect();
        let view = LabelView::new(&x, 4, &labels, c, LabelKind::Complementary);
        let objective = Objective::Corrected(&q);
        let model = SoftmaxModel64::init(arch, 4, c, model_seed);
        let idx: Vec<usize> = (0..6).collect();
        let (before, grad) = model.batch_loss_grad(&objective, &view, &idx).unwrap();
        let mut stepped = model.clone();
        for (p, g) in stepped.params_mut().iter_mut().zip(&grad) {
            *p -= 1e-4 * g;
        }
        let after = stepped.loss_on(&objective, &view, &idx).unwrap();
        prop_assert!(after <= before + 1e-12, "{} -> {}", before, after);
    }

    #[test]
    fn projection_is_idempotent((c, k, seed, which) in regime()) {
        let q = build(c, k, seed, which);
        let (p, removed, fallback) = project(&q.rows()).unwrap();
        prop_assert!(fallback.is_empty());
        prop_assert!(removed.iter().all(|&v| v == 0.0));
        prop_assert_eq!(p, q);
    }

    #[test]
    fn true_posterior_beats_perturbations(seed in any::<u64>(), other in simplex(3)) {
        let problem = DiscreteProblem::<f64>::random_invertible(3, 1, seed).unwrap();
        let pbar = problem.complementary_posterior(0);
        let at_truth = conditional_risk(&problem.q, &problem.posterior[0], &pbar).unwrap();
        let elsewhere = conditional_risk(&problem.q, &other, &pbar).unwrap();
        prop_assert!(at_truth <= elsewhere + 1e-12);
    }
}
