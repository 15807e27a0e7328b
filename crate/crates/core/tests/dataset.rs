use proptest::prelude::*;
use qfl_core::dataset::{filter_digits, partition_equal, pool_features, stratified_subsample, LabeledImage, PoolGrid};

fn images() -> impl Strategy<Value = Vec<LabeledImage>> {
    prop::collection::vec((any::<u8>(), 0u8..10), 1..60).prop_map(|raw| {
        raw.into_iter()
            .map(|(fill, label)| {
                let pixels = (0..784).map(|i| fill.wrapping_add((i % 251) as u8)).collect();
                LabeledImage::new(pixels, label).unwrap()
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn shards_cover_the_data_exactly(n in 1usize..300, k_pick in any::<prop::sample::Index>(), seed in any::<u64>()) {
        let k = 1 + k_pick.index(n);
        let data: Vec<usize> = (0..n).collect();
        let shards = partition_equal(&data, k, seed).unwrap();
        prop_assert_eq!(shards.len(), k);
        let sizes: Vec<usize> = shards.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let mut all: Vec<usize> = shards.concat();
        all.sort_unstable();
        prop_assert_eq!(all, data);
        prop_assert_eq!(partition_equal(&(0..n).collect::<Vec<_>>(), k, seed).unwrap(), shards);
    }

    #[test]
    fn filtering_is_stable_and_remaps_bijectively(data in images(), digits in prop::sample::subsequence((0u8..10).collect::<Vec<_>>(), 1..4)) {
        if let Ok(kept) = filter_digits(&data, &digits) {
            prop_assert!(kept.windows(2).all(|w| w[0].source_index < w[1].source_index));
            let expected = data.iter().filter(|im| digits.contains(&im.label)).count();
            prop_assert_eq!(kept.len(), expected);
            for f in &kept {
                prop_assert_eq!(digits[f.class_index], f.image.label);
                prop_assert_eq!(&data[f.source_index], &f.image);
            }
        } else {
            prop_assert!(data.iter().all(|im| !digits.contains(&im.label)));
        }
    }

    #[test]
    fn pooled_features_stay_in_unit_interval(data in images(), g in 0usize..5) {
        let grid = [(2, 2), (2, 4), (4, 4), (4, 7), (7, 7)][g];
        let grid = PoolGrid::new(grid.0, grid.1).unwrap();
        for im in &data {
            let f = pool_features(im, grid);
            prop_assert_eq!(f.len(), grid.features());
            prop_assert!(f.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn subsample_keeps_class_proportions(
        classes in prop::collection::vec(0usize..3, 1..400),
        cap in 1usize..200,
        seed in any::<u64>(),
    ) {
        let picked = stratified_subsample(&classes, cap, seed);
        prop_assert_eq!(picked.len(), cap.min(classes.len()));
        prop_assert!(picked.windows(2).all(|w| w[0] < w[1]));
        let n = classes.len() as f64;
        for c in 0..3 {
            let have = picked.iter().filter(|&&i| classes[i] == c).count() as f64;
            let share = classes.iter().filter(|&&x| x == c).count() as f64 / n;
            prop_assert!((have - share * picked.len() as f64).abs() < 1.0 + 1e-9);
        }
    }
}
