#pragma once

#include <string>

#include "qcmesh/mesh.hpp"

namespace qcmesh {

// Serializes to the mesh JSON format; exact=true writes dyadic {"m","e"} coordinates when available.
std::string mesh_to_json(const Mesh& mesh, bool exact = false);
Mesh mesh_from_json(const std::string& text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& data);

std::string fnv1a_hex(const std::string& data);

}  // namespace qcmesh
