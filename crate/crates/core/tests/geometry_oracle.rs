mod common;

use common::{gen, naive};
use proptest::prelude::*;
use sscc_core::geometry::wkt::{parse_raw, to_wkt};
use sscc_core::geometry::{distance, inside, intersection_area, intersects, Geometry, GeomKind};

const EXTENT: f64 = 100.0;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-7 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1500))]

    #[test]
    fn distance_matches_brute_force(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let (a, b) = (gen::geometry(&mut rng, EXTENT), gen::geometry(&mut rng, EXTENT));
        let (got, want) = (distance(&a, &b), naive::distance(&a, &b));
        prop_assert!(close(got, want), "{} vs {}: {got} != {want}", to_wkt(&a), to_wkt(&b));
        prop_assert_eq!(got, distance(&b, &a));
        prop_assert_eq!(intersects(&a, &b), naive::intersects(&a, &b));
    }

    #[test]
    fn point_location_matches_winding_number(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let r = gen::holed_region(&mut rng, EXTENT);
        let bb = Geometry::from(r.clone()).bbox();
        // Sample around the region so all three outcomes occur.
        let p = sscc_core::geometry::Point::new(
            bb.min_x - 1.0 + (bb.width() + 2.0) * (seed % 1000) as f64 / 1000.0,
            bb.min_y - 1.0 + (bb.height() + 2.0) * (seed / 1000 % 1000) as f64 / 1000.0,
        );
        let want = naive::locate(p, &r) != naive::Loc::Outside;
        prop_assert_eq!(inside(&Geometry::Point(p), &r.into()).unwrap(), want);
    }

    #[test]
    fn convex_containment(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let container = gen::convex_region(&mut rng, EXTENT);
        let a = match seed % 3 {
            0 => gen::geometry_of(&mut rng, GeomKind::Point, EXTENT),
            1 => gen::geometry_of(&mut rng, GeomKind::Line, EXTENT),
            _ => gen::convex_region(&mut rng, EXTENT).into(),
        };
        prop_assert_eq!(inside(&a, &container.clone().into()).unwrap(), naive::inside_convex(&a, &container));
    }

    #[test]
    fn intersection_area_matches_clipping(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let (a, b) = (gen::convex_region(&mut rng, EXTENT), gen::convex_region(&mut rng, EXTENT));
        let (got, want) = (intersection_area(&a, &b), naive::convex_intersection_area(&a, &b));
        prop_assert!((got - want).abs() <= 1e-6 * (1.0 + want), "{got} != {want}");
    }

    #[test]
    fn wkt_round_trip(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let g = gen::geometry(&mut rng, EXTENT);
        let back = parse_raw(&to_wkt(&g)).unwrap().into_geometry().unwrap();
        prop_assert_eq!(back, g);
    }
}

#[test]
fn contained_shape_inside_holed_container() {
    let mut rng = gen::rng(7);
    for _ in 0..200 {
        let r = gen::holed_region(&mut rng, EXTENT);
        let g: Geometry = r.clone().into();
        // A region contains itself and its own vertices.
        assert!(inside(&g, &g).unwrap());
        for v in g.vertices() {
            assert!(inside(&Geometry::Point(v), &g).unwrap());
        }
        assert!(close(intersection_area(&r, &r), naive::shoelace(r.outer().vertices()).abs() - naive::shoelace(r.holes()[0].vertices()).abs()));
    }
}
