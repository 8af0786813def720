use dqk::data::{
    gen_checkerboard, load_csv, partition, train_test_split, write_csv, CheckerboardSpec, PartitionPlan,
    PartitionStrategy,
};
use dqk::Error;
use proptest::prelude::*;

#[test]
fn csv_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("board.csv");
    let d = gen_checkerboard(&CheckerboardSpec { seed: 5, ..Default::default() }).unwrap();
    write_csv(&path, &d).unwrap();
    assert_eq!(load_csv(&path).unwrap(), d);
    assert!(matches!(load_csv(dir.path().join("missing.csv")), Err(Error::Io(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn partitions_cover_disjointly(seed in any::<u64>(), n in prop::sample::select(vec![1usize, 2, 4, 8])) {
        let d = gen_checkerboard(&CheckerboardSpec { seed, ..Default::default() }).unwrap();
        for strategy in [PartitionStrategy::HeterogeneousByRegion, PartitionStrategy::UniformRandom] {
            let lists = PartitionPlan::new(strategy, n, seed).assign(&d).unwrap();
            let mut all: Vec<usize> = lists.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..d.len()).collect::<Vec<_>>());
            for part in partition(&d, &PartitionPlan::new(strategy, n, seed)).unwrap() {
                prop_assert!(part.has_both_labels());
            }
        }
    }

    #[test]
    fn split_is_disjoint_and_covering(seed in any::<u64>(), frac in 0.05f64..0.95) {
        let d = gen_checkerboard(&CheckerboardSpec { seed, points_per_cell: 3, ..Default::default() }).unwrap();
        let (train, test) = train_test_split(&d, frac, seed).unwrap();
        prop_assert_eq!(train.len() + test.len(), d.len());
        for p in test.points() {
            prop_assert!(!train.points().contains(p));
        }
    }
}
