//! Builds the structured subdomain mesh and writes it as JSON.
//!
//! Usage: `mesh_dump [nsub] [hh] [output.json]`

use hdg_bddc::mesh::{build_structured_mesh, EdgeClass, MeshConfig};

fn main() -> hdg_bddc::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let nsub = args.first().and_then(|s| s.parse().ok()).unwrap_or(3);
    let hh = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let mesh = build_structured_mesh(MeshConfig::new(nsub, hh))?;

    println!("H = {}, h = {}", mesh.subdomain_size(), mesh.element_size());
    println!(
        "{} vertices, {} triangles, {} edges ({} interior, {} interface, {} boundary)",
        mesh.vertices.len(),
        mesh.triangles.len(),
        mesh.edges.len(),
        mesh.count(EdgeClass::Interior),
        mesh.count(EdgeClass::Interface),
        mesh.count(EdgeClass::Dirichlet)
    );
    for (i, me) in mesh.macro_edges.iter().enumerate() {
        println!(
            "macro-edge {i}: subdomains {:?}, {:?}, {} fine edges, normal {:?}",
            me.subdomains,
            me.orientation,
            me.edges.len(),
            me.master_normal
        );
    }
    if let Some(path) = args.get(2) {
        std::fs::write(path, mesh.to_json()?)?;
        println!("wrote {path}");
    }
    Ok(())
}
