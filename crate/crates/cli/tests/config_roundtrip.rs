use proptest::prelude::*;
use volform_cli::{parse_config, Command, FieldSource, MetricSpec, RunConfig};

fn metric() -> impl Strategy<Value = MetricSpec> {
    let expr = (-2.0f64..2.0, 1u32..4).prop_map(|(c, k)| format!("{c:?}*cos({k}*x1) + 0.1*sin(x3)"));
    prop_oneof![
        Just(MetricSpec::Flat),
        expr.clone().prop_map(MetricSpec::Conformal),
        expr.clone().prop_map(MetricSpec::KahlerPerturbed),
        expr.prop_map(MetricSpec::BalancedRoot),
        "[a-z]{1,8}\\.kfld".prop_map(|p| MetricSpec::File(p.into())),
    ]
}

fn source() -> impl Strategy<Value = Option<FieldSource>> {
    prop_oneof![
        Just(None),
        (-1.0f64..1.0).prop_map(|c| Some(FieldSource::Expr(format!("{c:?}*cos(x1 - x3)")))),
        "[a-z]{1,8}\\.kfld".prop_map(|p| Some(FieldSource::File(p.into()))),
    ]
}

fn config() -> impl Strategy<Value = RunConfig> {
    (
        prop::sample::select(Command::ALL.to_vec()),
        any::<u64>(),
        (1e-14f64..1e-2, 1e-6f64..10.0, prop::collection::vec(1e-6f64..1.0, 0..6)),
        (metric(), metric(), source(), source(), source()),
        (2usize..5, 4usize..40, 0usize..64),
    )
        .prop_map(|(command, seed, (tol, eps, eps_values), (m, a, phi0, phi1, psi), (p, nt, threads))| {
            let mut c = RunConfig::defaults(command);
            c.seed = seed;
            c.tol = tol;
            c.epsilon = eps;
            c.epsilon_values = eps_values;
            c.metric = m;
            c.alpha_spec = a;
            c.phi0 = phi0;
            c.phi1 = phi1;
            c.psi = psi;
            c.p = p;
            c.nt = nt;
            c.threads = threads;
            c.input = Some("runs/x".into());
            c
        })
}

proptest! {
    #[test]
    fn emit_then_parse_is_identity(c in config()) {
        let text = c.emit();
        // only configurations that validate are expected to round-trip
        let parsed = parse_config(&text);
        prop_assume!(parsed.is_ok());
        let parsed = parsed.unwrap();
        prop_assert_eq!(&parsed, &c);
        prop_assert_eq!(parsed.emit(), text);
    }

    #[test]
    fn parsing_never_panics(text in "[a-z_0-9 =,.#()*+\\-\n]{0,200}") {
        let _ = parse_config(&text);
    }
}

#[test]
fn valid_geodesic_configs_round_trip() {
    let mut c = RunConfig::defaults(Command::SweepEps);
    c.phi0 = Some(FieldSource::Expr("0.5*cos(2*x1)".into()));
    c.phi1 = Some(FieldSource::File("b.kfld".into()));
    c.metric = MetricSpec::BalancedRoot("0.1*cos(x1)".into());
    assert_eq!(parse_config(&c.emit()).unwrap(), c);
}
