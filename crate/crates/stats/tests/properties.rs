use gatework_stats::normal::{normal_cdf, normal_sf};
use gatework_stats::{bootstrap_median_se, bootstrap_median_se_exact, two_prop_z_one_sided};
use proptest::prelude::*;

/// Upper-tail probabilities from a 40-digit evaluation, rounded to 20.
#[allow(clippy::excessive_precision)]
const SF_TABLE: &[(f64, f64)] = &[
    (-8.00, 9.999999999999993779e-1),
    (-7.75, 9.9999999999999540537e-1),
    (-7.50, 9.9999999999996809108e-1),
    (-7.25, 9.9999999999979161418e-1),
    (-7.00, 9.9999999999872018746e-1),
    (-6.75, 9.9999999999260774222e-1),
    (-6.50, 9.9999999995983999416e-1),
    (-6.25, 9.9999999979477365748e-1),
    (-6.00, 9.9999999901341235496e-1),
    (-5.75, 9.999999955378275461e-1),
    (-5.50, 9.9999998101043753411e-1),
    (-5.25, 9.9999992395039483511e-1),
    (-5.00, 9.9999971334842812081e-1),
    (-4.75, 9.999989829167574313e-1),
    (-4.50, 9.9999660232687526994e-1),
    (-4.25, 9.9998931147422506558e-1),
    (-4.00, 9.9996832875816688008e-1),
    (-3.75, 9.9991158271479919613e-1),
    (-3.50, 9.9976737092096447496e-1),
    (-3.25, 9.9942297495760923296e-1),
    (-3.00, 9.9865010196836990547e-1),
    (-2.75, 9.9702023676494544325e-1),
    (-2.50, 9.9379033467422386483e-1),
    (-2.25, 9.8777552734495529685e-1),
    (-2.00, 9.772498680518207928e-1),
    (-1.75, 9.5994084313618290958e-1),
    (-1.50, 9.33192798731141934e-1),
    (-1.25, 8.9435022633314474231e-1),
    (-1.00, 8.4134474606854294859e-1),
    (-0.75, 7.7337264762313180067e-1),
    (-0.50, 6.9146246127401310364e-1),
    (-0.25, 5.9870632568292372424e-1),
    (0.00, 5.0e-1),
    (0.25, 4.0129367431707627576e-1),
    (0.50, 3.0853753872598689636e-1),
    (0.75, 2.2662735237686819933e-1),
    (1.00, 1.5865525393145705141e-1),
    (1.25, 1.0564977366685525769e-1),
    (1.50, 6.6807201268858066004e-2),
    (1.75, 4.0059156863817090419e-2),
    (2.00, 2.27501319481792072e-2),
    (2.25, 1.2224472655044703153e-2),
    (2.50, 6.209665325776135167e-3),
    (2.75, 2.9797632350545567543e-3),
    (3.00, 1.3498980316300945267e-3),
    (3.25, 5.7702504239076704292e-4),
    (3.50, 2.3262907903552503635e-4),
    (3.75, 8.8417285200803867818e-5),
    (4.00, 3.1671241833119921254e-5),
    (4.25, 1.0688525774934420469e-5),
    (4.50, 3.3976731247300604017e-6),
    (4.75, 1.0170832425687031713e-6),
    (5.00, 2.8665157187919391167e-7),
    (5.25, 7.6049605164887142511e-8),
    (5.50, 1.8989562465887719384e-8),
    (5.75, 4.4621724539016118731e-9),
    (6.00, 9.865876450376981407e-10),
    (6.25, 2.0522634252189388816e-10),
    (6.50, 4.0160005838591178083e-11),
    (6.75, 7.3922577780178224195e-12),
    (7.00, 1.2798125438858350044e-12),
    (7.25, 2.0838581586720694312e-13),
    (7.50, 3.1908916729108962278e-14),
    (7.75, 4.5946274357785954602e-15),
    (8.00, 6.2209605742717841235e-16),
    (0.708, 2.394726287398798851e-1),
    (1.644853627, 4.9999999994995103213e-2),
    (2.326347874, 1.0000000001088500343e-2),
    (3.0357348821182986, 1.1997512414156903281e-3),
];

#[test]
fn normal_tail_within_1e12_of_reference() {
    let mut worst: f64 = 0.0;
    for (z, sf) in SF_TABLE {
        worst = worst.max((normal_sf(*z) - sf).abs());
        worst = worst.max((normal_cdf(-*z) - sf).abs());
        worst = worst.max((normal_cdf(*z) - (1.0 - sf)).abs());
    }
    assert!(worst < 1e-12, "max abs error {worst}");
}

#[test]
fn reported_z_test_against_high_precision_values() {
    // 50-digit evaluation of the pooled statistic and its upper tail.
    let r = two_prop_z_one_sided(70, 94, 50, 94).unwrap();
    assert!((r.z - 3.035_734_882_118_298_7).abs() < 1e-12);
    assert!((r.p_one_sided - 1.199_751_241_415_69e-3).abs() < 1e-15);
    let r = two_prop_z_one_sided(10, 10, 0, 10).unwrap();
    assert!((r.p_one_sided - 3.872_108_215_522_042e-6).abs() < 1e-17);
}

proptest! {
    #[test]
    fn z_antisymmetric(n1 in 1u64..200, n2 in 1u64..200, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let x1 = (a * n1 as f64).floor() as u64;
        let x2 = (b * n2 as f64).floor() as u64;
        let f = two_prop_z_one_sided(x1, n1, x2, n2).unwrap();
        let r = two_prop_z_one_sided(x2, n2, x1, n1).unwrap();
        prop_assert_eq!(f.z, -r.z);
    }

    #[test]
    fn p_decreases_in_x1(n1 in 1u64..150, n2 in 1u64..150, b in 0.0f64..=1.0) {
        let x2 = (b * n2 as f64).floor() as u64;
        let rs: Vec<_> = (0..=n1).map(|x1| two_prop_z_one_sided(x1, n1, x2, n2).unwrap()).collect();
        for w in rs.windows(2) {
            prop_assert!(w[1].z > w[0].z, "{:?}", w);
            // Strict in exact arithmetic; f64 saturates at 1 far in the lower tail.
            prop_assert!(w[1].p_one_sided <= w[0].p_one_sided, "{:?}", w);
            if w[0].p_one_sided < 1.0 - 1e-9 {
                prop_assert!(w[1].p_one_sided < w[0].p_one_sided, "{:?}", w);
            }
        }
    }

    #[test]
    fn bootstrap_ignores_order(mut v in prop::collection::vec(0.0f64..100.0, 1..30), seed in any::<u64>(), rot in 0usize..30) {
        let a = bootstrap_median_se(&v, 64, seed).unwrap();
        let k = rot % v.len();
        v.rotate_left(k);
        v.reverse();
        prop_assert_eq!(a, bootstrap_median_se(&v, 64, seed).unwrap());
    }
}

#[test]
fn bootstrap_converges_to_enumeration() {
    let v = [1.0, 4.0, 2.0, 8.0, 5.0];
    let exact = bootstrap_median_se_exact(&v).unwrap();
    let approx = bootstrap_median_se(&v, 40_000, 11).unwrap();
    assert!((approx - exact).abs() / exact < 0.02, "{approx} vs {exact}");
}
