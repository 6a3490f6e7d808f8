//! Debug encoding of a point into cell tokens.

use mlgeo_core::cellgrid::{CellId, LatLng};

use crate::CellsArgs;

pub fn run(args: CellsArgs) -> anyhow::Result<()> {
    let point = LatLng::new(args.lat, args.lng)?;
    println!("level\ttoken\tcenter_lat\tcenter_lng");
    for level in args.levels {
        let cell = CellId::from_latlng(point, level)?;
        let center = cell.center();
        println!("{level}\t{}\t{}\t{}", cell.token(), center.lat(), center.lng());
    }
    Ok(())
}
