# snippet: python/rev
line = input()
print(line[::-1])
