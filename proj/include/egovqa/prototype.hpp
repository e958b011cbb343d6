#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "egovqa/error.hpp"

namespace egovqa {

enum class Category { Recipe, Ingredient, Nutrition, Action, ThreeD, Motion, Gaze };

inline constexpr std::array<Category, 7> kCategories = {Category::Recipe,   Category::Ingredient, Category::Nutrition,
                                                         Category::Action,   Category::ThreeD,     Category::Motion,
                                                         Category::Gaze};

inline constexpr std::string_view category_name(Category c) {
  switch (c) {
    case Category::Recipe: return "Recipe";
    case Category::Ingredient: return "Ingredient";
    case Category::Nutrition: return "Nutrition";
    case Category::Action: return "Action";
    case Category::ThreeD: return "3D";
    case Category::Motion: return "Motion";
    case Category::Gaze: return "Gaze";
  }
  return "";
}

enum class ModalityClass { SingleImage, MultiImage, SingleClip, MultiClip };

inline constexpr std::string_view modality_name(ModalityClass m) {
  switch (m) {
    case ModalityClass::SingleImage: return "SingleImage";
    case ModalityClass::MultiImage: return "MultiImage";
    case ModalityClass::SingleClip: return "SingleClip";
    case ModalityClass::MultiClip: return "MultiClip";
  }
  return "";
}

inline std::optional<ModalityClass> parse_modality(std::string_view s) {
  for (auto m : {ModalityClass::SingleImage, ModalityClass::MultiImage, ModalityClass::SingleClip,
                 ModalityClass::MultiClip})
    if (modality_name(m) == s) return m;
  return std::nullopt;
}

struct PrototypeInfo {
  std::string_view name;     // lower_snake_case key used in manifests
  std::string_view display;  // column header as printed in reports
  Category category;
};

// Column order of the per-prototype results table.
inline constexpr std::array<PrototypeInfo, 30> kPrototypes = {{
    {"recipe_recognition", "Recipe Recognition", Category::Recipe},
    {"multi_recipe_recognition", "Multi-Recipe Recognition", Category::Recipe},
    {"multi_step_localization", "Multi-Step Localization", Category::Recipe},
    {"step_localization", "Step Localization", Category::Recipe},
    {"prep_localization", "Prep Localization", Category::Recipe},
    {"step_recognition", "Step Recognition", Category::Recipe},
    {"rough_step_localization", "Rough Step Localization", Category::Recipe},
    {"following_activity_recognition", "Following Activity Recognition", Category::Recipe},
    {"ingredient_retrieval", "Ingredient Retrieval", Category::Ingredient},
    {"ingredient_weight", "Ingredient Weight", Category::Ingredient},
    {"ingredients_order", "Ingredients Order", Category::Ingredient},
    {"ingredient_adding_localization", "Ingredient Adding Localization", Category::Ingredient},
    {"ingredient_recognition", "Ingredient Recognition", Category::Ingredient},
    {"exact_ingredient_recognition", "Exact Ingredient Recognition", Category::Ingredient},
    {"image_nutrition_estimation", "Image Nutrition Estimation", Category::Nutrition},
    {"nutrition_change", "Nutrition Change", Category::Nutrition},
    {"video_nutrition_estimation", "Video Nutrition Estimation", Category::Nutrition},
    {"action_recognition", "Action Recognition", Category::Action},
    {"how_recognition", "How Recognition", Category::Action},
    {"why_recognition", "Why Recognition", Category::Action},
    {"action_localization", "Action Localization", Category::Action},
    {"fixture_location", "Fixture Location", Category::ThreeD},
    {"object_location", "Object Location", Category::ThreeD},
    {"object_contents_retrieval", "Object Contents Retrieval", Category::ThreeD},
    {"fixture_interaction_counting", "Fixture Interaction Counting", Category::ThreeD},
    {"object_movement_itinerary", "Object Movement Itinerary", Category::Motion},
    {"object_movement_counting", "Object Movement Counting", Category::Motion},
    {"stationary_object_localization", "Stationary Object Localization", Category::Motion},
    {"gaze_estimation", "Gaze Estimation", Category::Gaze},
    {"interaction_anticipation", "Interaction Anticipation", Category::Gaze},
}};

/// Index into kPrototypes; cheap to copy and compare.
class PrototypeId {
 public:
  static std::optional<PrototypeId> find(std::string_view name) {
    for (std::size_t i = 0; i < kPrototypes.size(); ++i)
      if (kPrototypes[i].name == name) return PrototypeId(i);
    return std::nullopt;
  }

  static PrototypeId from_name(std::string_view name) {
    if (auto p = find(name)) return *p;
    throw Error(Errc::UnknownPrototype, std::string(name));
  }

  static PrototypeId at(std::size_t index) { return PrototypeId(index); }

  std::size_t index() const { return index_; }
  std::string_view name() const { return kPrototypes[index_].name; }
  std::string_view display() const { return kPrototypes[index_].display; }
  Category category() const { return kPrototypes[index_].category; }

  friend bool operator==(const PrototypeId&, const PrototypeId&) = default;

 private:
  explicit PrototypeId(std::size_t i) : index_(i) {}
  std::size_t index_ = 0;
};

}  // namespace egovqa
