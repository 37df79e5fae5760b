use crate::graphstore::Store;

use super::*;

pub const MLST_LOCI: [&str; 7] = ["aroE", "gdh", "gki", "recP", "spi", "xpt", "ddl"];

pub fn admin() -> User {
    User::new("admin", Role::Admin)
}

pub fn store() -> Store {
    let store = Store::in_memory();
    crate::install_indexes(&store);
    store
}

pub fn mlst_schema() -> Schema {
    Schema {
        id: "spneumoniae-mlst".into(),
        taxon: "spneumoniae".into(),
        loci: MLST_LOCI.map(String::from).to_vec(),
        description: String::new(),
    }
}

/// Store with a schema, project `p1` owned by `owner` and dataset `d1`.
pub fn fixture(owner: &User, visibility: Visibility) -> (Store, DatasetHandle) {
    let store = store();
    let mut tx = store.write().unwrap();
    schema::save(&mut tx, &admin(), &mlst_schema()).unwrap();
    let (project, _) = project::save(
        &mut tx,
        owner,
        &Project {
            id: "p1".into(),
            name: "Project".into(),
            visibility,
            members: Default::default(),
        },
    )
    .unwrap();
    let (ds, _) = dataset::save(
        &mut tx,
        &project,
        &Dataset {
            id: "d1".into(),
            schema: "spneumoniae-mlst".into(),
            description: String::new(),
        },
    )
    .unwrap();
    tx.commit().unwrap();
    (store, ds)
}

pub fn profile(id: &str, alleles: [u32; 7]) -> AllelicProfile {
    AllelicProfile::new(id, alleles.map(|a| (a != 0).then(|| a.to_string())))
}
