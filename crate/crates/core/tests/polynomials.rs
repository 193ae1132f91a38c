use hofa_core::algebra::{AffineMap, Space, TorusValue};
use hofa_core::factors::{LabelSpace, PolyFactor, StructureFunction};
use hofa_core::polynomials::{additive_derivative, enumerate_polynomials, interpolate, interpolate_with_shift, NcPolynomial};
use hofa_core::Budget;
use proptest::prelude::*;

/// Smallest `d` such that every `(d+1)`-fold derivative vanishes, by brute force.
fn brute_degree(space: &Space, table: &[TorusValue], max: u32) -> u32 {
    let size = space.size();
    'd: for d in 0..=max {
        let k = d as usize + 1;
        for idx in 0..size.pow(k as u32) {
            let mut t = table.to_vec();
            let mut rest = idx;
            for _ in 0..k {
                t = additive_derivative(space, &t, rest % size);
                rest /= size;
            }
            if t.iter().any(|v| !v.is_zero()) {
                continue 'd;
            }
        }
        return d;
    }
    panic!("degree above {max}");
}

fn brute_depth(table: &[TorusValue]) -> u32 {
    table.iter().map(|v| v.exponent()).max().unwrap_or(0).saturating_sub(1)
}

#[test]
fn round_trip_on_enumerated_family() {
    for n in 1..=2 {
        let fam = enumerate_polynomials(2, n, 3, Budget::WORK).unwrap();
        for q in fam.iter() {
            assert_eq!(interpolate(2, n, &q.table().unwrap()).unwrap(), q);
        }
    }
}

#[test]
fn degree_depth_match_the_derivative_oracle() {
    let s = Space::new(2, 2).unwrap();
    let fam = enumerate_polynomials(2, 2, 3, Budget::WORK).unwrap();
    for q in fam.iter() {
        let t = q.table().unwrap();
        assert_eq!(q.degree(), brute_degree(&s, &t, 4), "{q}");
        assert_eq!(q.depth(), brute_depth(&t), "{q}");
    }
    let s3 = Space::new(3, 1).unwrap();
    for q in enumerate_polynomials(3, 1, 4, Budget::WORK).unwrap().iter() {
        let t = q.table().unwrap();
        assert_eq!(q.degree_and_depth(), (brute_degree(&s3, &t, 5), brute_depth(&t)), "{q}");
    }
}

#[test]
fn values_lie_in_the_depth_subgroup() {
    for (p, n, d) in [(2, 2, 3), (2, 3, 2), (3, 2, 2), (5, 1, 5)] {
        for q in enumerate_polynomials(p, n, d, Budget::WORK).unwrap().iter() {
            let k = q.depth() + 1;
            assert!(q.table().unwrap().iter().all(|v| v.lies_in(k)), "{q}");
        }
    }
}

#[test]
fn scaling_by_p_lowers_depth_and_degree() {
    for q in enumerate_polynomials(2, 2, 3, Budget::WORK).unwrap().iter().filter(|q| q.depth() >= 1) {
        let s = q.int_scale(2);
        assert_eq!(s.depth(), q.depth() - 1, "{q}");
        assert_eq!(s.degree(), q.degree() - 1, "{q}");
    }
}

fn bit_table(space: Space, g: &StructureFunction, b: &PolyFactor) -> Vec<TorusValue> {
    let unit = g.compose(b).unwrap();
    let _ = space;
    unit.real().unwrap().iter().map(|&v| TorusValue::new(2, v as i128, 1).unwrap()).collect()
}

fn composite_degree(g: &StructureFunction, b: &PolyFactor) -> u32 {
    let t = bit_table(b.space(), g, b);
    interpolate_with_shift(2, b.n(), &t).unwrap().1.degree()
}

/// Every boolean structure function on `labels`.
fn boolean_gammas(labels: &LabelSpace) -> Vec<StructureFunction> {
    let order = labels.order() as usize;
    (0..1u32 << order)
        .map(|mask| StructureFunction::new(labels.clone(), (0..order).map(|i| (mask >> i & 1) as f64).collect()).unwrap())
        .collect()
}

#[test]
fn composition_degree_is_monotone_for_high_rank_factors() {
    let n = 3;
    let lin = |a: &[u32]| NcPolynomial::linear(2, a).unwrap();
    let p = PolyFactor::new(2, n, vec![lin(&[1, 0, 0]), lin(&[0, 1, 0])]).unwrap();
    let low: Vec<NcPolynomial> = enumerate_polynomials(2, n, 1, Budget::WORK).unwrap().iter().collect();
    let gammas = boolean_gammas(p.label_space());
    for q1 in &low {
        for q2 in &low {
            let q = PolyFactor::new(2, n, vec![q1.clone(), q2.clone()]).unwrap();
            for g in &gammas {
                assert!(composite_degree(g, &q) <= composite_degree(g, &p), "{q1}, {q2}");
            }
        }
    }

    let quad = PolyFactor::new(2, n, vec![NcPolynomial::parse(2, n, "1 * x1^1*x2^1 / 2 + 1 * x3^1 / 2").unwrap()]).unwrap();
    let low2: Vec<NcPolynomial> =
        enumerate_polynomials(2, n, 2, Budget::WORK).unwrap().iter().filter(|q| q.is_classical()).collect();
    let gammas = boolean_gammas(quad.label_space());
    for q in &low2 {
        let qf = PolyFactor::new(2, n, vec![q.clone()]).unwrap();
        for g in &gammas {
            assert!(composite_degree(g, &qf) <= composite_degree(g, &quad), "{q}");
        }
    }
}

#[test]
fn low_rank_factors_can_break_monotonicity() {
    let n = 2;
    let x1 = NcPolynomial::linear(2, &[1, 0]).unwrap();
    let x2 = NcPolynomial::linear(2, &[0, 1]).unwrap();
    let p = PolyFactor::new(2, n, vec![x1.clone(), x1.clone()]).unwrap();
    let q = PolyFactor::new(2, n, vec![x1, x2]).unwrap();
    let and = StructureFunction::from_fn(p.label_space().clone(), |l| (l.0[0].numerator() * l.0[1].numerator()) as f64).unwrap();
    assert!(composite_degree(&and, &q) > composite_degree(&and, &p));
}

fn arb_poly(p: u32, n: usize, max_deg: u32) -> impl Strategy<Value = NcPolynomial> {
    let fam = enumerate_polynomials(p, n, max_deg, Budget::WORK).unwrap();
    let size = fam.size() as u64;
    (0..size).prop_map(move |i| fam.get(i as u128))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn addition_matches_pointwise_sums(a in arb_poly(3, 2, 3), b in arb_poly(3, 2, 3)) {
        let s = a.add(&b).unwrap();
        let (ta, tb, ts) = (a.table().unwrap(), b.table().unwrap(), s.table().unwrap());
        for i in 0..ts.len() {
            prop_assert_eq!(ts[i], ta[i].add(&tb[i]));
        }
        prop_assert!(a.add(&a.neg()).unwrap().is_zero());
    }

    #[test]
    fn affine_composition_never_raises_degree(q in arb_poly(2, 3, 4), seed in 0u64..1000) {
        let mut rng = hofa_core::rng::trial_rng(seed, 0);
        let m = 1 + (seed % 3) as usize;
        let a: AffineMap = hofa_core::algebra::sample_affine_embedding(&mut rng, 2, m, 3).unwrap();
        let (shift, r) = q.compose_affine(&a).unwrap();
        prop_assert!(r.degree() <= q.degree());
        prop_assert!(r.depth() <= q.depth());
        let tq = q.table().unwrap();
        let tr = r.table().unwrap();
        let img = a.image_indices().unwrap();
        for (x, &y) in img.iter().enumerate() {
            prop_assert_eq!(tr[x].add(&shift), tq[y]);
        }
    }

    #[test]
    fn text_form_round_trips(q in arb_poly(5, 2, 3)) {
        prop_assert_eq!(NcPolynomial::parse(5, 2, &q.to_string()).unwrap(), q);
    }
}
