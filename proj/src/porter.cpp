#include "siftkit/porter.hpp"

#include <algorithm>

namespace siftkit {
namespace {

// Working state for one word. `end` is the index of the last character of
// the current stem, `j` marks the end of the stem before a matched suffix.
class Stemmer {
 public:
  explicit Stemmer(std::string word) : b_(std::move(word)), end_(static_cast<int>(b_.size()) - 1) {}

  std::string run() {
    if (end_ <= 1) return b_;
    step1ab();
    if (end_ > 0) {
      step1c();
      step2();
      step3();
      step4();
      step5();
    }
    return b_.substr(0, static_cast<std::size_t>(end_ + 1));
  }

 private:
  bool cons(int i) const {
    switch (b_[i]) {
      case 'a': case 'e': case 'i': case 'o': case 'u':
        return false;
      case 'y':
        return i == 0 ? true : !cons(i - 1);
      default:
        return true;
    }
  }

  // Number of VC sequences in b[0..j].
  int measure() const {
    int n = 0;
    int i = 0;
    while (true) {
      if (i > j_) return n;
      if (!cons(i)) break;
      ++i;
    }
    ++i;
    while (true) {
      while (true) {
        if (i > j_) return n;
        if (cons(i)) break;
        ++i;
      }
      ++i;
      ++n;
      while (true) {
        if (i > j_) return n;
        if (!cons(i)) break;
        ++i;
      }
      ++i;
    }
  }

  bool vowel_in_stem() const {
    for (int i = 0; i <= j_; ++i)
      if (!cons(i)) return true;
    return false;
  }

  bool double_cons(int i) const {
    if (i < 1) return false;
    if (b_[i] != b_[i - 1]) return false;
    return cons(i);
  }

  // consonant-vowel-consonant ending at i, last consonant not w, x or y
  bool cvc(int i) const {
    if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
    const char ch = b_[i];
    return ch != 'w' && ch != 'x' && ch != 'y';
  }

  bool ends(std::string_view s) {
    const int len = static_cast<int>(s.size());
    if (len > end_ + 1) return false;
    if (std::string_view(b_).substr(static_cast<std::size_t>(end_ - len + 1), s.size()) != s) return false;
    j_ = end_ - len;
    return true;
  }

  void set_to(std::string_view s) {
    b_.replace(static_cast<std::size_t>(j_ + 1), static_cast<std::size_t>(end_ - j_), s);
    end_ = j_ + static_cast<int>(s.size());
    b_.resize(static_cast<std::size_t>(end_ + 1));
  }

  void replace_if_measured(std::string_view s) {
    if (measure() > 0) set_to(s);
  }

  void step1ab() {
    if (b_[end_] == 's') {
      if (ends("sses")) {
        end_ -= 2;
      } else if (ends("ies")) {
        set_to("i");
      } else if (b_[end_ - 1] != 's') {
        --end_;
      }
    }
    if (ends("eed")) {
      if (measure() > 0) --end_;
    } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
      end_ = j_;
      b_.resize(static_cast<std::size_t>(end_ + 1));
      if (ends("at")) {
        set_to("ate");
      } else if (ends("bl")) {
        set_to("ble");
      } else if (ends("iz")) {
        set_to("ize");
      } else if (double_cons(end_)) {
        --end_;
        const char ch = b_[end_];
        if (ch == 'l' || ch == 's' || ch == 'z') ++end_;
      } else {
        j_ = end_;
        if (measure() == 1 && cvc(end_)) {
          b_.resize(static_cast<std::size_t>(end_ + 1));
          b_.push_back('e');
          ++end_;
        }
      }
    }
    b_.resize(static_cast<std::size_t>(end_ + 1));
  }

  void step1c() {
    if (ends("y") && vowel_in_stem()) b_[end_] = 'i';
  }

  void step2() {
    if (end_ < 1) return;
    switch (b_[end_ - 1]) {
      case 'a':
        if (ends("ational")) { replace_if_measured("ate"); break; }
        if (ends("tional")) { replace_if_measured("tion"); break; }
        break;
      case 'c':
        if (ends("enci")) { replace_if_measured("ence"); break; }
        if (ends("anci")) { replace_if_measured("ance"); break; }
        break;
      case 'e':
        if (ends("izer")) { replace_if_measured("ize"); break; }
        break;
      case 'l':
        if (ends("abli")) { replace_if_measured("able"); break; }
        if (ends("alli")) { replace_if_measured("al"); break; }
        if (ends("entli")) { replace_if_measured("ent"); break; }
        if (ends("eli")) { replace_if_measured("e"); break; }
        if (ends("ousli")) { replace_if_measured("ous"); break; }
        break;
      case 'o':
        if (ends("ization")) { replace_if_measured("ize"); break; }
        if (ends("ation")) { replace_if_measured("ate"); break; }
        if (ends("ator")) { replace_if_measured("ate"); break; }
        break;
      case 's':
        if (ends("alism")) { replace_if_measured("al"); break; }
        if (ends("iveness")) { replace_if_measured("ive"); break; }
        if (ends("fulness")) { replace_if_measured("ful"); break; }
        if (ends("ousness")) { replace_if_measured("ous"); break; }
        break;
      case 't':
        if (ends("aliti")) { replace_if_measured("al"); break; }
        if (ends("iviti")) { replace_if_measured("ive"); break; }
        if (ends("biliti")) { replace_if_measured("ble"); break; }
        break;
      default:
        break;
    }
  }

  void step3() {
    switch (b_[end_]) {
      case 'e':
        if (ends("icate")) { replace_if_measured("ic"); break; }
        if (ends("ative")) { replace_if_measured(""); break; }
        if (ends("alize")) { replace_if_measured("al"); break; }
        break;
      case 'i':
        if (ends("iciti")) { replace_if_measured("ic"); break; }
        break;
      case 'l':
        if (ends("ical")) { replace_if_measured("ic"); break; }
        if (ends("ful")) { replace_if_measured(""); break; }
        break;
      case 's':
        if (ends("ness")) { replace_if_measured(""); break; }
        break;
      default:
        break;
    }
  }

  void step4() {
    if (end_ < 1) return;
    bool matched = false;
    switch (b_[end_ - 1]) {
      case 'a':
        matched = ends("al");
        break;
      case 'c':
        matched = ends("ance") || ends("ence");
        break;
      case 'e':
        matched = ends("er");
        break;
      case 'i':
        matched = ends("ic");
        break;
      case 'l':
        matched = ends("able") || ends("ible");
        break;
      case 'n':
        matched = ends("ant") || ends("ement") || ends("ment") || ends("ent");
        break;
      case 'o':
        if (ends("ion") && j_ >= 0 && (b_[j_] == 's' || b_[j_] == 't')) {
          matched = true;
        } else {
          matched = ends("ou");
        }
        break;
      case 's':
        matched = ends("ism");
        break;
      case 't':
        matched = ends("ate") || ends("iti");
        break;
      case 'u':
        matched = ends("ous");
        break;
      case 'v':
        matched = ends("ive");
        break;
      case 'z':
        matched = ends("ize");
        break;
      default:
        break;
    }
    if (matched && measure() > 1) {
      end_ = j_;
      b_.resize(static_cast<std::size_t>(end_ + 1));
    }
  }

  void step5() {
    j_ = end_;
    const int last = end_;
    if (b_[last] == 'e') {
      const int a = measure();
      if (a > 1 || (a == 1 && !cvc(end_ - 1))) --end_;
    }
    if (b_[last] == 'l' && double_cons(end_) && measure() > 1) --end_;
    b_.resize(static_cast<std::size_t>(end_ + 1));
  }

  std::string b_;
  int end_;
  int j_ = 0;
};

}  // namespace

std::string porter_stem(std::string_view word) {
  const bool plain = std::all_of(word.begin(), word.end(), [](char c) { return c >= 'a' && c <= 'z'; });
  if (!plain || word.size() <= 2) return std::string(word);
  return Stemmer(std::string(word)).run();
}

}  // namespace siftkit
