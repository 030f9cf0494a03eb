#!/usr/bin/env python3
"""Closed-form trainable-parameter count for the classifier layer stack.

Independent of the C++ code: walks the stage list by hand and sums
k*k*cin*cout + cout (conv bias) + 2*cout (BN gamma/beta) per conv block,
plus the fully-connected head.
"""


def conv_block(cin, cout, k):
    return k * k * cin * cout + cout + 2 * cout


def c2f(cin, cout, n):
    hidden = cout // 2
    total = conv_block(cin, 2 * hidden, 1)
    total += n * 2 * conv_block(hidden, hidden, 3)
    total += conv_block((2 + n) * hidden, cout, 1)
    return total


def network(num_classes=2):
    total = 0
    total += conv_block(3, 16, 3)
    total += conv_block(16, 32, 3)
    total += c2f(32, 32, 1)
    total += conv_block(32, 64, 3)
    total += c2f(64, 64, 2)
    total += conv_block(64, 128, 3)
    total += c2f(128, 128, 2)
    total += conv_block(128, 256, 3)
    total += c2f(256, 256, 1)
    total += 256 * num_classes + num_classes
    return total


if __name__ == "__main__":
    print(network(2))
