// SPDX-License-Identifier: Apache-2.0

#include "coreagent/ui_model.hpp"

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <charconv>
#include <sstream>

#include "coreagent/digest.hpp"
#include "coreagent/error.hpp"

namespace coreagent::ui {

namespace pt = boost::property_tree;

Rect Rect::united(const Rect& other) const {
  return Rect{std::min(left, other.left), std::min(top, other.top), std::max(right, other.right),
              std::max(bottom, other.bottom)};
}

namespace {

bool is_attribute_key(const std::string& key) {
  return key == "<xmlattr>" || key == "<xmlcomment>" || key == "<xmltext>";
}

bool parse_bool_attr(const std::string& value) { return value == "true" || value == "1"; }

std::optional<int> parse_int(std::string_view s) {
  int value = 0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return value;
}

struct Builder {
  int next_id = 0;
  std::vector<UiElement> elements;

  UiNode build(const pt::ptree& xml, std::vector<int>& ancestors) {
    UiNode node;
    node.node_id = next_id++;
    bool explicit_editable = false;
    if (auto attrs = xml.get_child_optional("<xmlattr>")) {
      for (const auto& [key, value] : *attrs) {
        const std::string& v = value.data();
        if (key == "class") node.widget_class = v;
        else if (key == "text") node.text = v;
        else if (key == "content-desc") node.content_desc = v;
        else if (key == "resource-id") node.resource_id = v;
        else if (key == "clickable") node.flags.clickable = parse_bool_attr(v);
        else if (key == "long-clickable") node.flags.long_clickable = parse_bool_attr(v);
        else if (key == "scrollable") node.flags.scrollable = parse_bool_attr(v);
        else if (key == "enabled") node.flags.enabled = parse_bool_attr(v);
        else if (key == "editable") {
          explicit_editable = true;
          node.flags.editable = parse_bool_attr(v);
        } else if (key == "bounds") {
          node.bounds = parse_bounds(v).value_or(Rect{});
        }
      }
    }
    if (!explicit_editable) {
      node.flags.editable = node.widget_class.find("EditText") != std::string::npos;
    }

    if (is_important(node)) {
      UiElement element;
      element.element_index = static_cast<int>(elements.size());
      element.node_id = node.node_id;
      element.ancestor_path = ancestors;
      element.bounds = node.bounds;
      element.rendered = render_element(element, node);
      elements.push_back(std::move(element));
    }

    ancestors.push_back(node.node_id);
    for (const auto& [key, child] : xml) {
      if (is_attribute_key(key)) continue;
      node.children.push_back(build(child, ancestors));
    }
    ancestors.pop_back();
    return node;
  }
};

void append_attr(std::string& out, std::string_view name, std::string_view raw) {
  if (raw.empty()) return;
  std::string value;
  std::size_t codepoints = 0;
  std::size_t i = 0;
  bool truncated = false;
  while (i < raw.size()) {
    if (codepoints == kMaxRenderedAttributeChars) {
      truncated = true;
      break;
    }
    const auto lead = static_cast<unsigned char>(raw[i]);
    std::size_t len = 1;
    if (lead >= 0xF0) len = 4;
    else if (lead >= 0xE0) len = 3;
    else if (lead >= 0xC0) len = 2;
    len = std::min(len, raw.size() - i);
    if (len == 1) {
      const char c = raw[i];
      if (c == '"') value += "&quot;";
      else if (c == '\n' || c == '\r' || c == '\t') value += ' ';
      else value += c;
    } else {
      value.append(raw.substr(i, len));
    }
    i += len;
    ++codepoints;
  }
  if (truncated) value += "...";
  out += ' ';
  out += name;
  out += "=\"";
  out += value;
  out += '"';
}

std::string_view class_suffix(std::string_view widget_class) {
  const auto dot = widget_class.rfind('.');
  return dot == std::string_view::npos ? widget_class : widget_class.substr(dot + 1);
}

std::string_view short_resource_id(std::string_view rid) {
  const auto slash = rid.rfind('/');
  return slash == std::string_view::npos ? rid : rid.substr(slash + 1);
}

}  // namespace

std::optional<Rect> parse_bounds(std::string_view text) {
  // [x1,y1][x2,y2]
  int values[4];
  std::size_t pos = 0;
  for (int pair = 0; pair < 2; ++pair) {
    if (pos >= text.size() || text[pos] != '[') return std::nullopt;
    const auto comma = text.find(',', pos);
    const auto close = text.find(']', pos);
    if (comma == std::string_view::npos || close == std::string_view::npos || comma > close) return std::nullopt;
    auto a = parse_int(text.substr(pos + 1, comma - pos - 1));
    auto b = parse_int(text.substr(comma + 1, close - comma - 1));
    if (!a || !b) return std::nullopt;
    values[pair * 2] = *a;
    values[pair * 2 + 1] = *b;
    pos = close + 1;
  }
  if (pos != text.size()) return std::nullopt;
  return Rect{values[0], values[1], values[2], values[3]};
}

bool is_important(const UiNode& node) {
  if (node.flags.editable) return true;
  const bool interactable = node.flags.clickable || node.flags.long_clickable;
  const bool meaningful = !node.text.empty() || !node.content_desc.empty() || !node.resource_id.empty();
  return interactable && meaningful;
}

std::string_view tag_for_class(std::string_view widget_class) {
  const auto suffix = class_suffix(widget_class);
  if (suffix == "Button" || suffix == "ImageButton") return "button";
  if (suffix == "EditText") return "input";
  if (suffix == "TextView") return "p";
  if (suffix == "CheckBox" || suffix == "Switch") return "checkbox";
  return "div";
}

std::string render_element(const UiElement& element, const UiNode& node) {
  const auto tag = tag_for_class(node.widget_class);
  std::string out = "<";
  out += tag;
  append_attr(out, "text", node.text);
  append_attr(out, "description", node.content_desc);
  append_attr(out, "id", short_resource_id(node.resource_id));
  out += " index=";
  out += std::to_string(element.element_index);
  out += "></";
  out += tag;
  out += '>';
  return out;
}

std::string digest_renderings(const std::vector<std::string>& renderings) {
  std::string canonical;
  for (const auto& r : renderings) {
    canonical += r;
    canonical += '\n';
  }
  return sha256_hex(canonical);
}

UiTree::UiTree(UiNode root, std::vector<UiElement> elements, std::string source_hash)
    : root_(std::move(root)), elements_(std::move(elements)), source_hash_(std::move(source_hash)) {
  std::vector<std::string> renderings;
  renderings.reserve(elements_.size());
  for (const auto& e : elements_) renderings.push_back(e.rendered);
  screen_digest_ = digest_renderings(renderings);

  std::vector<const UiNode*> stack{&root_};
  while (!stack.empty()) {
    const UiNode* n = stack.back();
    stack.pop_back();
    ++node_count_;
    for (const auto& c : n->children) stack.push_back(&c);
  }
}

const UiNode* UiTree::find_node(int node_id) const {
  const UiNode* current = &root_;
  while (current->node_id != node_id) {
    if (node_id < current->node_id || current->children.empty()) return nullptr;
    // Pre-order ids: the subtree holding node_id is rooted at the last child
    // whose id does not exceed it.
    const UiNode* next = nullptr;
    for (const auto& c : current->children) {
      if (c.node_id <= node_id) next = &c;
      else break;
    }
    if (next == nullptr) return nullptr;
    current = next;
  }
  return current;
}

const UiElement* UiTree::element(int element_index) const {
  if (element_index < 0 || element_index >= static_cast<int>(elements_.size())) return nullptr;
  return &elements_[static_cast<std::size_t>(element_index)];
}

ElementIdentity UiTree::identity(int element_index) const {
  const UiElement* e = element(element_index);
  if (e == nullptr) return {};
  const UiNode* n = find_node(e->node_id);
  if (n == nullptr) return {};
  return ElementIdentity{n->text, n->content_desc, n->resource_id};
}

bool UiTree::has_scrollable() const {
  std::vector<const UiNode*> stack{&root_};
  while (!stack.empty()) {
    const UiNode* n = stack.back();
    stack.pop_back();
    if (n->flags.scrollable) return true;
    for (const auto& c : n->children) stack.push_back(&c);
  }
  return false;
}

UiTree parse_hierarchy(std::string_view xml_text) {
  pt::ptree doc;
  try {
    std::istringstream in{std::string(xml_text)};
    pt::read_xml(in, doc);
  } catch (const pt::xml_parser_error& e) {
    throw Error(ErrorKind::MalformedXml, e.what());
  }

  const pt::ptree* root_xml = nullptr;
  for (const auto& [key, child] : doc) {
    if (is_attribute_key(key)) continue;
    if (root_xml != nullptr) throw Error(ErrorKind::MalformedXml, "multiple root elements");
    root_xml = &child;
  }
  if (root_xml == nullptr) throw Error(ErrorKind::MalformedXml, "no root element");

  const bool has_child = std::any_of(root_xml->begin(), root_xml->end(),
                                     [](const auto& kv) { return !is_attribute_key(kv.first); });
  if (!has_child) throw Error(ErrorKind::EmptyHierarchy, "no nodes under the hierarchy root");

  Builder builder;
  std::vector<int> ancestors;
  UiNode root = builder.build(*root_xml, ancestors);
  return UiTree(std::move(root), std::move(builder.elements), sha256_hex(xml_text));
}

}  // namespace coreagent::ui
