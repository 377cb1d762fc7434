//! Print the Cap'n Proto schema for the warehouse RPCs and for a small
//! interface parsed from text.

use protoattest::schema::{gen_capnp, gen_capnp_with_file_id, hbw_interface_spec, parse_interface};

fn main() -> anyhow::Result<()> {
    print!("{}", gen_capnp(&hbw_interface_spec())?);
    println!();

    let conveyor = parse_interface(
        "interface conveyor_rpc\n\
         method move_to(station, speed) -> move_result\n\
         method halt(unit)\n\
         enum station { intake, press, outlet }\n\
         enum speed { slow, fast }\n\
         enum move_result { arrived, blocked }\n",
    )?;
    print!("{}", gen_capnp_with_file_id(&conveyor, Some("0xc3a1f0e2b4d69781"))?);
    Ok(())
}
