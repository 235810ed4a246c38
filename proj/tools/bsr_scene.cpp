// Writes the default kitchen scene as JSON, the format accepted by --scene.

#include <iostream>

#include "bsr/world.hpp"

int main() {
  std::cout << bsr::scene_to_json(bsr::make_kitchen_scene()).dump(2) << "\n";
  return 0;
}
