//! Fixtures shared by the benchmarks.

use sspd_core::simulator::{simulate_campaign, CampaignPlan, GroundTruthDetector};
use sspd_core::SweepData;

/// One simulated sweep from the default ground truth at a setting with
/// resolvable one- and two-photon terms.
pub fn sample_sweep() -> SweepData {
    let plan = CampaignPlan {
        wavelengths_nm: vec![1500.0],
        bias_currents_ua: vec![16.0],
        ..Default::default()
    };
    simulate_campaign(&GroundTruthDetector::default(), &plan)
        .expect("default plan is valid")
        .remove(0)
}
