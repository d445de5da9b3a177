// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace coreagent::ui {

struct Rect {
  int left = 0;
  int top = 0;
  int right = 0;
  int bottom = 0;

  [[nodiscard]] int center_x() const { return (left + right) / 2; }
  [[nodiscard]] int center_y() const { return (top + bottom) / 2; }
  [[nodiscard]] Rect united(const Rect& other) const;

  friend bool operator==(const Rect&, const Rect&) = default;
};

struct NodeFlags {
  bool clickable = false;
  bool long_clickable = false;
  bool editable = false;
  bool scrollable = false;
  bool enabled = false;

  friend bool operator==(const NodeFlags&, const NodeFlags&) = default;
};

/// One widget of the hierarchy dump. node_id is the pre-order rank, root = 0.
struct UiNode {
  int node_id = 0;
  std::string widget_class;
  std::string text;
  std::string content_desc;
  std::string resource_id;
  Rect bounds;
  NodeFlags flags;
  std::vector<UiNode> children;

  friend bool operator==(const UiNode&, const UiNode&) = default;
};

/// An important (interactable and meaningful) node as seen by the models.
struct UiElement {
  int element_index = 0;
  int node_id = 0;
  /// XML ancestors of the node, root first, excluding the node itself.
  std::vector<int> ancestor_path;
  std::string rendered;
  Rect bounds;
  std::optional<std::vector<std::string>> sensitive_tags;

  friend bool operator==(const UiElement&, const UiElement&) = default;
};

/// Attribute triple used to recognise "the same element" across runs whose
/// indices may differ.
struct ElementIdentity {
  std::string text;
  std::string content_desc;
  std::string resource_id;

  friend bool operator==(const ElementIdentity&, const ElementIdentity&) = default;
  friend auto operator<=>(const ElementIdentity&, const ElementIdentity&) = default;
};

class UiTree {
 public:
  UiTree(UiNode root, std::vector<UiElement> elements, std::string source_hash);

  [[nodiscard]] const UiNode& root() const { return root_; }
  [[nodiscard]] const std::vector<UiElement>& elements() const { return elements_; }
  [[nodiscard]] const std::string& source_hash() const { return source_hash_; }

  /// Resolves a pre-order node id; nullptr when out of range.
  [[nodiscard]] const UiNode* find_node(int node_id) const;
  [[nodiscard]] const UiElement* element(int element_index) const;
  [[nodiscard]] ElementIdentity identity(int element_index) const;

  [[nodiscard]] int node_count() const { return node_count_; }
  [[nodiscard]] bool has_scrollable() const;

  /// Digest over the canonical element renderings; stable under cosmetic
  /// attribute churn that does not change what the models see.
  [[nodiscard]] const std::string& screen_digest() const { return screen_digest_; }

 private:
  UiNode root_;
  std::vector<UiElement> elements_;
  std::string source_hash_;
  std::string screen_digest_;
  int node_count_ = 0;
};

inline constexpr std::size_t kMaxRenderedAttributeChars = 120;

/// Parses a uiautomator-style hierarchy dump. Throws MalformedXml / EmptyHierarchy.
UiTree parse_hierarchy(std::string_view xml_text);

bool is_important(const UiNode& node);

/// HTML-style tag name for a widget class (Button -> button, EditText -> input, ...).
std::string_view tag_for_class(std::string_view widget_class);

std::string render_element(const UiElement& element, const UiNode& node);

/// Digest of an ordered list of element renderings (the screen identity).
std::string digest_renderings(const std::vector<std::string>& renderings);

/// Parses "[x1,y1][x2,y2]"; returns nullopt on malformed input.
std::optional<Rect> parse_bounds(std::string_view text);

}  // namespace coreagent::ui
