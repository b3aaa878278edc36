macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!("../examples/", stringify!($name), ".rs"));
        }

        #[test]
        fn $name() {
            $name::run_example().unwrap();
        }
    };
}

example!(partitioned_algebra);
example!(test_statistics);
example!(lemma_suite);
example!(power_study);
example!(cone_geometry);
example!(csv_stats);
