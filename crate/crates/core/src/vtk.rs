//! Legacy ASCII VTK export.

use std::io::{self, Write};

use crate::mesh::BoxMesh;

const VTK_HEXAHEDRON: u8 = 12;

/// Writes the node lattice as an unstructured grid. Each order-`p` element
/// is split into `p³` trilinear sub-cells.
pub fn write_vtk<W: Write>(
    mut w: W,
    mesh: &BoxMesh,
    displacement: Option<&[f64]>,
    title: &str,
) -> io::Result<()> {
    let d = mesh.node_dims();
    let cells: Vec<[usize; 8]> = {
        let mut v = Vec::new();
        for k in 0..d[2] - 1 {
            for j in 0..d[1] - 1 {
                for i in 0..d[0] - 1 {
                    let n = |a, b, c| mesh.node_index(i + a, j + b, k + c);
                    v.push([
                        n(0, 0, 0),
                        n(1, 0, 0),
                        n(1, 1, 0),
                        n(0, 1, 0),
                        n(0, 0, 1),
                        n(1, 0, 1),
                        n(1, 1, 1),
                        n(0, 1, 1),
                    ]);
                }
            }
        }
        v
    };
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.lines().next().unwrap_or("hyperpmg"))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.num_nodes())?;
    for c in mesh.coords() {
        writeln!(w, "{:.17e} {:.17e} {:.17e}", c[0], c[1], c[2])?;
    }
    writeln!(w, "CELLS {} {}", cells.len(), cells.len() * 9)?;
    for c in &cells {
        write!(w, "8")?;
        for n in c {
            write!(w, " {n}")?;
        }
        writeln!(w)?;
    }
    writeln!(w, "CELL_TYPES {}", cells.len())?;
    for _ in &cells {
        writeln!(w, "{VTK_HEXAHEDRON}")?;
    }
    if let Some(u) = displacement {
        writeln!(w, "POINT_DATA {}", mesh.num_nodes())?;
        writeln!(w, "VECTORS displacement double")?;
        for n in u.chunks_exact(3) {
            writeln!(w, "{:.17e} {:.17e} {:.17e}", n[0], n[1], n[2])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q2_element_has_eight_subcells() {
        let m = BoxMesh::new([1.0; 3], [1, 1, 1], 2).unwrap();
        let u = vec![0.0; m.num_dofs()];
        let mut buf = Vec::new();
        write_vtk(&mut buf, &m, Some(&u), "test").unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains("POINTS 27 double"));
        assert!(s.contains("CELLS 8 72"));
        assert!(s.contains("CELL_TYPES 8"));
        assert!(s.contains("VECTORS displacement double"));
    }
}
