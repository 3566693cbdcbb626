use shardsim_core::allocate_hash;

const KS: [u32; 6] = [1, 2, 7, 16, 32, 1000];

#[test]
fn hash_allocator_matches_reference_vectors() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/hash_vectors.csv");
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let id = &rec[0];
        for (col, &k) in KS.iter().enumerate() {
            let want: u32 = rec[col + 1].parse().unwrap();
            assert_eq!(allocate_hash(id, k).get(), want, "id {id}, k {k}");
        }
        rows += 1;
    }
    assert!(rows >= 100);
}
