"""Corpus of small MiniLang programs used across the test suite.

P1/P2/P3 are the canonical programs most unit tests hand-trace; PROGRAMS
holds the full set used for oracle-equivalence and question-soundness runs;
NONTERMINATING lists the single-loop programs that never finish regardless
of (valid) inputs, used for nontermination-detection checks.
"""
import textwrap


def _src(text: str) -> str:
    return textwrap.dedent(text).strip() + "\n"


P1 = _src("""
    int main(int n) {
      int s = 0;
      for (int i = 0; i < n; i = i + 1) {
        s = s + i;
      }
      print(s);
      return 0;
    }
""")

P2 = _src("""
    int main() {
      int i = 0;
      while (i < 5) {
        print(i);
      }
      return 0;
    }
""")

P3 = _src("""
    int main() {
      int[4] a;
      int j = 0;
      while (j <= 4) {
        a[j] = j;
        j = j + 1;
      }
      return 0;
    }
""")

PROGRAMS: dict[str, str] = {
    "p1_sum_loop": P1,
    "p2_infinite_print": P2,
    "p3_array_overrun": P3,
    "countdown_while": _src("""
        int main(int n) {
          while (n > 0) {
            print(n);
            n = n - 1;
          }
          return n;
        }
    """),
    "sum_even_for": _src("""
        int main(int n) {
          int total = 0;
          for (int i = 0; i <= n; i = i + 2) {
            total = total + i;
          }
          print(total);
          return total;
        }
    """),
    "factorial_iter": _src("""
        int main(int n) {
          int acc = 1;
          for (int i = 1; i <= n; i = i + 1) {
            acc = acc * i;
          }
          print(acc);
          return acc;
        }
    """),
    "max_of_two": _src("""
        int main(int a, int b) {
          int best = b;
          if (a > b) {
            best = a;
          }
          print(best);
          return best;
        }
    """),
    "abs_value": _src("""
        int main(int x) {
          if (x < 0) {
            x = 0 - x;
          }
          print(x);
          return x;
        }
    """),
    "sign_chain": _src("""
        int main(int x) {
          int sign = 0;
          if (x > 0) {
            sign = 1;
          } else if (x < 0) {
            sign = 0 - 1;
          } else {
            sign = 0;
          }
          print(sign);
          return sign;
        }
    """),
    "nested_loop_grid": _src("""
        int main(int n) {
          int cells = 0;
          for (int i = 0; i < n; i = i + 1) {
            for (int j = 0; j < n; j = j + 1) {
              cells = cells + 1;
            }
          }
          print(cells);
          return cells;
        }
    """),
    "array_fill_and_sum": _src("""
        int main(int start) {
          int[5] box;
          for (int i = 0; i < 5; i = i + 1) {
            box[i] = start + i;
          }
          int sum = 0;
          for (int k = 0; k < 5; k = k + 1) {
            sum = sum + box[k];
          }
          print(sum);
          return sum;
        }
    """),
    "array_reverse_print": _src("""
        int main(int[4] a) {
          for (int i = 3; i >= 0; i = i - 1) {
            print(a[i]);
          }
          return 0;
        }
    """),
    "array_max": _src("""
        int main(int[5] a) {
          int best = a[0];
          for (int i = 1; i < 5; i = i + 1) {
            if (a[i] > best) {
              best = a[i];
            }
          }
          print(best);
          return best;
        }
    """),
    "gcd_while": _src("""
        int main(int a, int b) {
          while (b != 0) {
            int t = a % b;
            a = b;
            b = t;
          }
          print(a);
          return a;
        }
    """),
    "fib_iter": _src("""
        int main(int n) {
          int prev = 0;
          int cur = 1;
          for (int i = 0; i < n; i = i + 1) {
            int next = prev + cur;
            prev = cur;
            cur = next;
          }
          print(prev);
          return prev;
        }
    """),
    "power_loop": _src("""
        int main(int base, int exp) {
          int result = 1;
          for (int i = 0; i < exp; i = i + 1) {
            result = result * base;
          }
          print(result);
          return result;
        }
    """),
    "div_by_input": _src("""
        int main(int a, int b) {
          int q = a / b;
          print(q);
          return q;
        }
    """),
    "mod_check_even": _src("""
        int main(int n) {
          int even = 0;
          if (n % 2 == 0) {
            even = 1;
          }
          print(even);
          return even;
        }
    """),
    "helper_square": _src("""
        int square(int x) {
          return x * x;
        }
        int main(int n) {
          int out = square(n);
          print(out);
          return out;
        }
    """),
    "helper_clamp": _src("""
        int clamp(int x, int lo, int hi) {
          if (x < lo) {
            return lo;
          }
          if (x > hi) {
            return hi;
          }
          return x;
        }
        int main(int v) {
          int out = clamp(v, 0 - 3, 3);
          print(out);
          return out;
        }
    """),
    "recursive_sum": _src("""
        int rec(int n) {
          if (n <= 0) {
            return 0;
          }
          return n + rec(n - 1);
        }
        int main(int n) {
          int out = rec(n);
          print(out);
          return out;
        }
    """),
    "recurse_forever": _src("""
        int spin(int n) {
          return spin(n + 1);
        }
        int main(int n) {
          return spin(n);
        }
    """),
    "count_digits": _src("""
        int main(int n) {
          int count = 0;
          while (n != 0) {
            n = n / 10;
            count = count + 1;
          }
          print(count);
          return count;
        }
    """),
    "collatz_bounded": _src("""
        int main(int n) {
          int steps = 0;
          while (n > 1 && steps < 50) {
            if (n % 2 == 0) {
              n = n / 2;
            } else {
              n = 3 * n + 1;
            }
            steps = steps + 1;
          }
          print(steps);
          return steps;
        }
    """),
    "triangle_rows": _src("""
        int main(int rows) {
          int stars = 0;
          for (int r = 1; r <= rows; r = r + 1) {
            for (int c = 0; c < r; c = c + 1) {
              stars = stars + 1;
            }
            print(stars);
          }
          return stars;
        }
    """),
    "count_positives": _src("""
        int main(int[6] a) {
          int hits = 0;
          for (int i = 0; i < 6; i = i + 1) {
            if (a[i] > 0) {
              hits = hits + 1;
            }
          }
          print(hits);
          return hits;
        }
    """),
    "array_shift_left": _src("""
        int main(int[3] a) {
          int first = a[0];
          for (int i = 0; i < 2; i = i + 1) {
            a[i] = a[i + 1];
          }
          a[2] = first;
          print(a[0]);
          print(a[2]);
          return 0;
        }
    """),
    "multi_print": _src("""
        int main(int x) {
          print(x);
          print(x * 2);
          print(x * 3);
          return 0;
        }
    """),
    "swap_vars": _src("""
        int main(int a, int b) {
          int tmp = a;
          a = b;
          b = tmp;
          print(a);
          print(b);
          return 0;
        }
    """),
    "min_of_three": _src("""
        int main(int a, int b, int c) {
          int low = a;
          if (b < low) {
            low = b;
          }
          if (c < low) {
            low = c;
          }
          print(low);
          return low;
        }
    """),
    "sum_while": _src("""
        int main(int n) {
          int s = 0;
          int i = 0;
          while (i < n) {
            s = s + i;
            i = i + 1;
          }
          print(s);
          return s;
        }
    """),
    "shadowed_loop_vars": _src("""
        int main(int n) {
          int acc = 0;
          for (int i = 0; i < n; i = i + 1) {
            acc = acc + i;
          }
          for (int i = 0; i < n; i = i + 1) {
            acc = acc + 1;
          }
          print(acc);
          return acc;
        }
    """),
    "while_no_update_sum": _src("""
        int main() {
          int total = 0;
          int k = 3;
          while (k > 0) {
            total = total + k;
          }
          print(total);
          return total;
        }
    """),
    "while_wrong_direction": _src("""
        int main() {
          int i = 0;
          while (i < 5) {
            i = i - 1;
          }
          return i;
        }
    """),
    "flag_never_cleared": _src("""
        int main() {
          int done = 0;
          int ticks = 0;
          while (done == 0) {
            ticks = ticks + 1;
          }
          print(ticks);
          return ticks;
        }
    """),
    "late_bound_check": _src("""
        int main(int n) {
          int[4] slots;
          int used = 0;
          for (int i = 0; i < 4; i = i + 1) {
            if (i < n) {
              slots[i] = i * 2;
              used = used + 1;
            }
          }
          print(used);
          return used;
        }
    """),
}

# single-loop programs whose loop never exits for any valid input;
# the loop line each run must be attributed to
NONTERMINATING: dict[str, int] = {
    "p2_infinite_print": 3,
    "while_no_update_sum": 4,
    "while_wrong_direction": 3,
    "flag_never_cleared": 4,
}
