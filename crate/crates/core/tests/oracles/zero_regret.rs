//! Policies handed the true parameters never regret, and every policy is
//! regret-free when the whole population can be monitored.

use crate::common::{fcom_cfg, synthetic};
use fedmon_core::baselines::{clucb, LinUcb, LinUcbConfig, SyncLinUcb, SyncLinUcbConfig};
use fedmon_core::environment::SyntheticEnvironment;
use fedmon_core::fcom::{Fcom, FcomConfig};
use fedmon_core::harness::{run_replication, PolicyKind};
use fedmon_core::policy::Policy;
use nalgebra::DVector;

fn truth_parts(env: &SyntheticEnvironment) -> (DVector<f64>, Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let gt = &env.truth;
    let q = DVector::from_column_slice(gt.q.as_slice());
    let cs = (0..gt.n_units()).map(|i| gt.c.column(i).clone_owned()).collect();
    let betas = (0..gt.n_units()).map(|i| gt.beta.column(i).clone_owned()).collect();
    (q, cs, betas)
}

pub fn oracle_policies_have_zero_regret() {
    let env = synthetic(12, 0.0, 300, 4);
    let (q, cs, betas) = truth_parts(&env);
    let m = 4;

    let mut linucb = LinUcb::new(LinUcbConfig { ridge: 1.0, alpha: 0.0 }, 12, 5).unwrap();
    linucb.preload(&betas, 1e6).unwrap();
    let r = run_replication(PolicyKind::Linucb, &mut linucb, &env, m, 0, 4, true);
    assert_eq!(r.final_regret, 0.0);
    assert!(r.rows.iter().all(|row| row.inst_regret == 0.0));

    for kind in [PolicyKind::Fcom, PolicyKind::Clucb] {
        let cfg = FcomConfig {
            eta2: 1e-9,
            ..fcom_cfg(2, 2.0, 0.0)
        };
        let mut policy = match kind {
            PolicyKind::Fcom => Fcom::new(cfg, 12, 5, 4).unwrap(),
            _ => clucb(cfg, 12, 5, 4).unwrap(),
        };
        policy.preload(&q, &cs, 1e6).unwrap();
        let r = run_replication(kind, &mut policy, &env, m, 0, 4, true);
        assert!(r.failure.is_none());
        assert_eq!(r.final_regret, 0.0, "{kind}");
        if kind == PolicyKind::Fcom {
            assert!(r.rows.iter().all(|row| row.inst_regret == 0.0));
        }
    }
}

pub fn full_budget_has_zero_regret_for_every_policy() {
    let env = synthetic(6, 1.0, 60, 2);
    let policies: Vec<(PolicyKind, Box<dyn Policy>)> = vec![
        (PolicyKind::Fcom, Box::new(Fcom::new(fcom_cfg(2, 2.0, 0.5), 6, 5, 2).unwrap())),
        (PolicyKind::Clucb, Box::new(clucb(fcom_cfg(2, 2.0, 0.5), 6, 5, 2).unwrap())),
        (PolicyKind::Linucb, Box::new(LinUcb::new(LinUcbConfig::default(), 6, 5).unwrap())),
        (
            PolicyKind::SyncLinucb,
            Box::new(SyncLinUcb::new(SyncLinUcbConfig::default(), 6, 5).unwrap()),
        ),
    ];
    for (kind, mut p) in policies {
        let r = run_replication(kind, p.as_mut(), &env, 6, 0, 2, false);
        assert_eq!(r.final_regret, 0.0, "{kind}");
    }
}
